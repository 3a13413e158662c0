//! Tokenizer checks against the standard uncased BERT vocabulary.

use std::path::PathBuf;

use stancebench_core::records::{DatasetKey, Split, StanceRecord};
use stancebench_core::wordpiece::{encode_pair, fragmentation_stats, tokenize, tokenize_word, Vocab};

fn vocab() -> Vocab {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/vocab-uncased.txt");
    Vocab::from_file(&path).unwrap()
}

#[test]
fn vocab_shape() {
    let v = vocab();
    assert_eq!(v.len(), 30_522);
    assert_eq!(v.id("[UNK]"), Some(100));
    assert_eq!(v.id("the"), Some(1996));
}

#[test]
fn perturbed_words_fragment() {
    let v = vocab();
    assert_eq!(tokenize_word("esaier", &v), ["esa", "##ier"]);
    assert_eq!(tokenize_word("oarents", &v), ["o", "##are", "##nts"]);
    assert_eq!(tokenize_word("parents", &v), ["parents"]);
    assert_eq!(tokenize_word("easier", &v), ["easier"]);
    assert_eq!(tokenize_word("sohuld", &v), ["so", "##hul", "##d"]);
    assert_eq!(tokenize_word("ectended", &v), ["ec", "##ten", "##ded"]);
}

#[test]
fn original_sample_is_not_split() {
    let v = vocab();
    assert_eq!(
        tokenize("School Day Should Be Extended", &v),
        ["school", "day", "should", "be", "extended"]
    );
    assert_eq!(
        tokenize("So much easier for parents!", &v),
        ["so", "much", "easier", "for", "parents", "!"]
    );
}

#[test]
fn fragmentation_grows_under_spelling_errors() {
    let v = vocab();
    let original = StanceRecord::new(
        DatasetKey::Perspectrum,
        Split::Test,
        0,
        Some("School Day Should Be Extended".into()),
        "So much easier for parents!",
        "support",
    );
    let mut perturbed = original.clone();
    perturbed.topic = Some("School Day Sohuld Be Ectended".into());
    perturbed.comment = "So much esaier for oarents!".into();
    let s = fragmentation_stats(&original, &perturbed, &v);
    assert_eq!(s.words_before, 10);
    assert_eq!(s.words_after, 10);
    assert_eq!(s.words_split_before, 0);
    assert_eq!(s.words_split_after, 4);
    assert_eq!(s.pieces_per_word_before, 1.0);
    // 6 unchanged words + 3 + 3 + 2 + 3 pieces
    assert!((s.pieces_per_word_after - 17.0 / 10.0).abs() < 1e-12);
}

#[test]
fn long_document_is_cut_to_100_pieces() {
    let v = vocab();
    let comment = "the quick brown fox jumps over the lazy dog . ".repeat(15);
    let pair = encode_pair(Some("animals"), &comment, &v, 100).unwrap();
    assert_eq!(pair.comment.pieces.len(), 100);
    assert_eq!(pair.comment.dropped, 50);
    assert_eq!(pair.topic.unwrap().pieces, ["animals"]);
}
