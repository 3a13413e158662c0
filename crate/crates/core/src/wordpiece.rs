//! Uncased WordPiece tokenization, used for the 100-piece input truncation and
//! for measuring how perturbations fragment words into sub-word pieces.
//!
//! Text is cleaned, lowercased, accent-stripped and split on whitespace and
//! punctuation before each word is decomposed greedily, longest prefix first.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::records::StanceRecord;

pub const CONTINUATION_PREFIX: &str = "##";
pub const UNKNOWN_PIECE: &str = "[UNK]";
/// Words longer than this (in chars) map straight to the unknown piece.
pub const MAX_WORD_CHARS: usize = 100;
/// Per-input truncation length used by the benchmark models.
pub const DEFAULT_MAX_PIECES: usize = 100;

#[derive(Debug, Error)]
pub enum WordpieceError {
    #[error("vocabulary lacks single-letter pieces: {0}")]
    MissingAlphabet(String),
    #[error("max_pieces must be at least 1")]
    ZeroMaxPieces,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read-only piece vocabulary; line index is the piece id.
#[derive(Debug, Clone)]
pub struct Vocab {
    pieces: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_pieces<I, S>(pieces: I) -> Result<Self, WordpieceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let pieces: Vec<String> = pieces.into_iter().map(Into::into).collect();
        let mut ids = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            ids.entry(p.clone()).or_insert(i as u32);
        }
        let vocab = Vocab { pieces, ids };
        let missing: Vec<String> = ('a'..='z')
            .flat_map(|c| [c.to_string(), format!("{CONTINUATION_PREFIX}{c}")])
            .filter(|p| !vocab.contains(p))
            .collect();
        if !missing.is_empty() {
            return Err(WordpieceError::MissingAlphabet(missing.join(" ")));
        }
        Ok(vocab)
    }

    /// One piece per line, UTF-8.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, WordpieceError> {
        let lines = BufReader::new(reader)
            .lines()
            .map(|l| l.map(|s| s.trim_end_matches('\r').to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_pieces(lines)
    }

    pub fn from_file(path: &Path) -> Result<Self, WordpieceError> {
        Self::from_reader(File::open(path)?)
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.ids.contains_key(piece)
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

fn is_punctuation(c: char) -> bool {
    if c.is_ascii_punctuation() {
        return true;
    }
    matches!(
        c as u32,
        0xA1 | 0xA7 | 0xAB | 0xB6 | 0xB7 | 0xBB | 0xBF
            | 0x2010..=0x2027
            | 0x2030..=0x205E
            | 0x3001..=0x3003
            | 0x3008..=0x3011
            | 0x3014..=0x301F
            | 0xFF01..=0xFF0F
            | 0xFF1A..=0xFF20
    )
}

fn is_cjk(c: char) -> bool {
    matches!(
        c as u32,
        0x4E00..=0x9FFF
            | 0x3400..=0x4DBF
            | 0x20000..=0x2A6DF
            | 0x2A700..=0x2B73F
            | 0x2B740..=0x2B81F
            | 0x2B820..=0x2CEAF
            | 0xF900..=0xFAFF
            | 0x2F800..=0x2FA1F
    )
}

/// Lowercases, strips accents and splits `text` into words and punctuation.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        if !current.is_empty() {
            tokens.push(std::mem::take(current));
        }
    };
    let normalized: String = text.to_lowercase().nfd().filter(|c| !is_combining_mark(*c)).collect();
    for c in normalized.chars() {
        if c == '\0' || c == '\u{FFFD}' || (c.is_control() && !c.is_whitespace()) {
            continue;
        }
        if c.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if is_punctuation(c) || is_cjk(c) {
            flush(&mut current, &mut tokens);
            tokens.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Greedy longest-prefix decomposition of one normalized word.
///
/// Non-initial pieces carry the `##` prefix. When some remainder has no
/// matching piece the whole word becomes `[UNK]`.
pub fn tokenize_word(word: &str, vocab: &Vocab) -> Vec<String> {
    if word.is_empty() {
        return Vec::new();
    }
    let bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).chain([word.len()]).collect();
    if bounds.len() - 1 > MAX_WORD_CHARS {
        return vec![UNKNOWN_PIECE.to_string()];
    }
    let mut pieces = Vec::new();
    let mut candidate = String::with_capacity(word.len() + 2);
    let mut start = 0;
    while start < bounds.len() - 1 {
        let mut end = bounds.len() - 1;
        let mut found = false;
        while end > start {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION_PREFIX);
            }
            candidate.push_str(&word[bounds[start]..bounds[end]]);
            if vocab.contains(&candidate) {
                found = true;
                break;
            }
            end -= 1;
        }
        if !found {
            return vec![UNKNOWN_PIECE.to_string()];
        }
        pieces.push(candidate.clone());
        start = end;
    }
    pieces
}

/// Full pipeline: basic tokenization followed by WordPiece.
pub fn tokenize(text: &str, vocab: &Vocab) -> Vec<String> {
    basic_tokenize(text)
        .iter()
        .flat_map(|w| tokenize_word(w, vocab))
        .collect()
}

/// Pieces of one input after truncation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub pieces: Vec<String>,
    /// Pieces cut off by truncation.
    pub dropped: usize,
}

impl EncodedInput {
    fn truncated(mut pieces: Vec<String>, max_pieces: usize) -> Self {
        let dropped = pieces.len().saturating_sub(max_pieces);
        pieces.truncate(max_pieces);
        EncodedInput { pieces, dropped }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPair {
    pub topic: Option<EncodedInput>,
    pub comment: EncodedInput,
}

impl EncodedPair {
    pub fn dropped(&self) -> usize {
        self.comment.dropped + self.topic.as_ref().map_or(0, |t| t.dropped)
    }
}

/// Tokenizes topic and comment and truncates each to `max_pieces`.
pub fn encode_pair(
    topic: Option<&str>,
    comment: &str,
    vocab: &Vocab,
    max_pieces: usize,
) -> Result<EncodedPair, WordpieceError> {
    if max_pieces == 0 {
        return Err(WordpieceError::ZeroMaxPieces);
    }
    Ok(EncodedPair {
        topic: topic.map(|t| EncodedInput::truncated(tokenize(t, vocab), max_pieces)),
        comment: EncodedInput::truncated(tokenize(comment, vocab), max_pieces),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FragmentationStats {
    pub words_before: usize,
    pub words_after: usize,
    /// Words decomposed into more than one piece.
    pub words_split_before: usize,
    pub words_split_after: usize,
    pub pieces_per_word_before: f64,
    pub pieces_per_word_after: f64,
}

#[derive(Default)]
struct Tally {
    words: usize,
    split: usize,
    pieces: usize,
}

fn tally(record: &StanceRecord, vocab: &Vocab) -> Tally {
    let mut t = Tally::default();
    let inputs = record.topic.iter().map(String::as_str).chain([record.comment.as_str()]);
    for text in inputs {
        for word in basic_tokenize(text) {
            if !word.chars().any(char::is_alphanumeric) {
                continue;
            }
            let n = tokenize_word(&word, vocab).len();
            t.words += 1;
            t.pieces += n;
            if n > 1 {
                t.split += 1;
            }
        }
    }
    t
}

/// Compares sub-word fragmentation of a record and its perturbed counterpart.
/// Punctuation tokens are not counted as words.
pub fn fragmentation_stats(original: &StanceRecord, perturbed: &StanceRecord, vocab: &Vocab) -> FragmentationStats {
    let ratio = |t: &Tally| {
        if t.words == 0 {
            0.0
        } else {
            t.pieces as f64 / t.words as f64
        }
    };
    let before = tally(original, vocab);
    let after = tally(perturbed, vocab);
    FragmentationStats {
        words_before: before.words,
        words_after: after.words,
        words_split_before: before.split,
        words_split_after: after.split,
        pieces_per_word_before: ratio(&before),
        pieces_per_word_after: ratio(&after),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vocab {
        let mut pieces: Vec<String> = vec!["[PAD]".into(), "[UNK]".into()];
        for c in 'a'..='z' {
            pieces.push(c.to_string());
            pieces.push(format!("##{c}"));
        }
        for p in ["un", "##aff", "##able", "unaff", "runn", "##ing", "run"] {
            pieces.push(p.into());
        }
        Vocab::from_pieces(pieces).unwrap()
    }

    #[test]
    fn greedy_longest_prefix() {
        let v = toy();
        assert_eq!(tokenize_word("unaffable", &v), ["unaff", "##able"]);
        assert_eq!(tokenize_word("running", &v), ["runn", "##ing"]);
        assert_eq!(tokenize_word("xyz", &v), ["x", "##y", "##z"]);
        assert!(tokenize_word("", &v).is_empty());
    }

    #[test]
    fn unknown_when_no_decomposition() {
        let v = toy();
        assert_eq!(tokenize_word("ab9", &v), [UNKNOWN_PIECE]);
        assert_eq!(tokenize_word(&"a".repeat(101), &v), [UNKNOWN_PIECE]);
        assert_eq!(tokenize_word(&"a".repeat(100), &v).len(), 100);
    }

    #[test]
    fn vocab_requires_alphabet() {
        let err = Vocab::from_pieces(["a", "b"]).unwrap_err();
        assert!(matches!(err, WordpieceError::MissingAlphabet(_)));
    }

    #[test]
    fn vocab_from_reader_handles_crlf() {
        let mut text = String::from("[UNK]\r\n");
        for c in 'a'..='z' {
            text.push_str(&format!("{c}\r\n##{c}\r\n"));
        }
        let v = Vocab::from_reader(text.as_bytes()).unwrap();
        assert_eq!(v.id("[UNK]"), Some(0));
        assert_eq!(v.piece(1), Some("a"));
    }

    #[test]
    fn basic_tokenization() {
        assert_eq!(
            basic_tokenize("So much EASIER for parents!"),
            ["so", "much", "easier", "for", "parents", "!"]
        );
        assert_eq!(basic_tokenize("Café\tnaïve—ok"), ["cafe", "naive", "—", "ok"]);
        assert_eq!(basic_tokenize("a\u{0}b  "), ["ab"]);
        assert_eq!(basic_tokenize("中文"), ["中", "文"]);
    }

    #[test]
    fn truncation() {
        let v = toy();
        let long = vec!["ab"; 75].join(" ");
        let pair = encode_pair(None, &long, &v, 100).unwrap();
        assert!(pair.topic.is_none());
        assert_eq!(pair.comment.pieces.len(), 100);
        assert_eq!(pair.comment.dropped, 50);

        let short = vec!["ab"; 40].join(" ");
        let pair = encode_pair(Some("run"), &short, &v, 100).unwrap();
        assert_eq!(pair.comment.pieces.len(), 80);
        assert_eq!(pair.comment.dropped, 0);
        assert_eq!(pair.topic.unwrap().pieces, ["run"]);

        assert!(matches!(
            encode_pair(None, "a", &v, 0),
            Err(WordpieceError::ZeroMaxPieces)
        ));
    }

    #[test]
    fn identical_records_have_equal_stats() {
        use crate::records::{DatasetKey, Split};
        let v = toy();
        let r = StanceRecord::new(
            DatasetKey::Perspectrum,
            Split::Test,
            0,
            Some("run it".into()),
            "unaffable",
            "support",
        );
        let s = fragmentation_stats(&r, &r, &v);
        assert_eq!(s.words_before, s.words_after);
        assert_eq!(s.words_split_before, s.words_split_after);
        assert_eq!(s.pieces_per_word_before, s.pieces_per_word_after);
        assert_eq!(s.words_before, 3);
    }
}
