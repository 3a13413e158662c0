//! Property tests for the attack, sampling, split and readability invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use stancebench_core::attacks::{eligible_words, misspell, negate, InputTargets, KeyboardAdjacency, NEGATION_PREFIX};
use stancebench_core::correctness::{count_syllables, fk_formula, paraphrase_correctness, Judgment};
use stancebench_core::ingest::{generate_split, subsample_train, SplitAssignment, SplitRule};
use stancebench_core::{DatasetKey, Split, StanceRecord};

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-zA-Z]{1,12}",
        1 => "[a-z]{2,8}[.,!?]",
        1 => "@[a-z]{3,8}",
        1 => "[a-z]{3,6}[0-9]{1,3}",
    ]
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..25).prop_map(|w| w.join(" "))
}

fn record(topic: Option<String>, comment: String) -> StanceRecord {
    StanceRecord::new(DatasetKey::Perspectrum, Split::Test, 0, topic, comment, "support")
}

proptest! {
    #[test]
    fn spelling_preserves_shape(topic in sentence(), comment in sentence(), seed in any::<u64>()) {
        let original = record(Some(topic), comment);
        let perturbed = misspell(&original, seed, InputTargets::Both);
        let adjacency = KeyboardAdjacency::qwerty();
        for (a, b) in [(&original.comment, &perturbed.comment), (original.topic.as_ref().unwrap(), perturbed.topic.as_ref().unwrap())] {
            prop_assert_eq!(a.len(), b.len());
            let words = eligible_words(a);
            let diffs: Vec<usize> = (0..a.len()).filter(|&i| a.as_bytes()[i] != b.as_bytes()[i]).collect();
            let mut hit: Vec<usize> = diffs
                .iter()
                .map(|&i| words.iter().position(|w| w.contains(&i)).expect("edit inside an eligible word"))
                .collect();
            hit.dedup();
            prop_assert!(hit.len() <= 2);
            prop_assert!(diffs.len() <= 3);
            for &i in &diffs {
                let (x, y) = (a.as_bytes()[i] as char, b.as_bytes()[i] as char);
                prop_assert!(y.is_ascii_alphabetic());
                // a swapped letter came from its neighbour, a substituted one from the keyboard
                let swapped = (i > 0 && b.as_bytes()[i] == a.as_bytes()[i - 1]) || b.as_bytes().get(i) == a.as_bytes().get(i + 1);
                prop_assert!(swapped || adjacency.are_adjacent(x, y));
            }
        }
        prop_assert_eq!(&perturbed, &misspell(&original, seed, InputTargets::Both));
    }

    #[test]
    fn negation_is_a_prefix(topic in proptest::option::of(sentence()), comment in sentence()) {
        let original = record(topic.clone(), comment.clone());
        let negated = negate(&original, InputTargets::Both);
        prop_assert_eq!(negated.comment, format!("{NEGATION_PREFIX} {comment}"));
        prop_assert_eq!(negated.topic, topic.map(|t| format!("{NEGATION_PREFIX} {t}")));
        let comment_only = negate(&original, InputTargets::CommentOnly);
        prop_assert_eq!(comment_only.topic, original.topic);
    }

    #[test]
    fn subsample_respects_class_quotas(
        classes in prop::collection::vec(1usize..200, 1..5),
        ratio in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut records = Vec::new();
        for (c, &n) in classes.iter().enumerate() {
            for _ in 0..n {
                let i = records.len();
                records.push(StanceRecord::new(DatasetKey::Ibmcs, Split::Train, i, Some("t".into()), "c", if c % 2 == 0 { "pro" } else { "con" }));
            }
        }
        let split = SplitAssignment {
            dataset: DatasetKey::Ibmcs,
            assignment: records.iter().map(|r| (r.id.clone(), r.split)).collect(),
            seed: 0,
            rule: "published".into(),
        };
        let sample = subsample_train(&split, &records, ratio, seed).unwrap();
        let n = records.len();
        let k = (ratio * n as f64 + 0.5).floor() as usize;
        prop_assert_eq!(sample.ids.len(), k);
        let mut per_class: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let chosen: std::collections::HashSet<&String> = sample.ids.iter().collect();
        for r in &records {
            let e = per_class.entry(r.gold.as_str()).or_default();
            e.1 += 1;
            if chosen.contains(&r.id) {
                e.0 += 1;
            }
        }
        for (sel, n_c) in per_class.values() {
            let exact = k as f64 * *n_c as f64 / n as f64;
            prop_assert!((*sel as f64 - exact).abs() < 1.0);
        }
        prop_assert_eq!(sample, subsample_train(&split, &records, ratio, seed).unwrap());
    }

    #[test]
    fn splits_ignore_input_order(n in 10usize..300, seed in any::<u64>(), rotate in 0usize..300) {
        let records: Vec<StanceRecord> = (0..n)
            .map(|i| StanceRecord::new(DatasetKey::Snopes, Split::Train, i, Some(format!("topic {}", i % 7)), "c", "support"))
            .collect();
        for rule in [
            SplitRule::Random { train: 0.7, dev: 0.1, test: 0.2 },
            SplitRule::TopicDisjoint { train: 0.7, dev: 0.1, test: 0.2 },
        ] {
            let a = generate_split(DatasetKey::Snopes, &records, &rule, seed).unwrap();
            let mut shuffled = records.clone();
            let len = shuffled.len();
            shuffled.rotate_left(rotate % len);
            shuffled.reverse();
            let b = generate_split(DatasetKey::Snopes, &shuffled, &rule, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.sizes().total(), n);
        }
    }

    #[test]
    fn fk_grows_with_syllables(words in 1usize..200, sentences in 1usize..20, syllables in 1usize..600) {
        prop_assert!(fk_formula(words, sentences, syllables + 1) > fk_formula(words, sentences, syllables));
        prop_assert!(fk_formula(words, sentences + 1, syllables) < fk_formula(words, sentences, syllables));
    }

    #[test]
    fn syllables_are_positive(w in "[a-zA-Z]{1,20}") {
        let n = count_syllables(&w);
        prop_assert!(n >= 1);
        prop_assert!(n <= w.len());
    }

    #[test]
    fn correctness_is_a_ratio(verdicts in prop::collection::vec(any::<bool>(), 1..100)) {
        let judgments: Vec<Judgment> = verdicts
            .iter()
            .enumerate()
            .map(|(i, &equal)| Judgment { dataset: DatasetKey::ALL[i % 10], id: format!("id{i}"), equal, note: String::new() })
            .collect();
        let est = paraphrase_correctness(&judgments).unwrap();
        prop_assert!((0.0..=1.0).contains(&est.c));
        let want = verdicts.iter().filter(|v| **v).count() as f64 / verdicts.len() as f64;
        prop_assert!((est.c - want).abs() < 1e-12);
        for c in est.per_dataset.values() {
            prop_assert!((0.0..=1.0).contains(c));
        }
    }
}
