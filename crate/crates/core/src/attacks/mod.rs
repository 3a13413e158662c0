//! Adversarial perturbations of a test split.
//!
//! Each perturbed record keeps its gold label and points back to the original
//! through `meta.source_id`. All randomness is drawn per record from
//! [`derive_rng`], so the output is identical for any worker count.

pub mod keyboard;
pub mod negation;
pub mod paraphrase;
pub mod spelling;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::{read_jsonl, write_jsonl, AttackKind, DatasetKey, RecordError, StanceRecord};
use crate::seeding::derive_rng;

pub use keyboard::KeyboardAdjacency;
pub use negation::{negate, InputTargets, NEGATION_PREFIX};
pub use paraphrase::{apply_paraphrase, ParaphraseMap};
pub use spelling::{eligible_words, misspell_text, Edit, Misspelling, SpellingFlag};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("keyboard adjacency: {0}")]
    Adjacency(String),
    #[error("no paraphrase for {} record(s), first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    Uncovered(Vec<String>),
    #[error("paraphrase attack needs a paraphrase file")]
    MissingParaphrases,
    #[error("duplicate paraphrase id {0}")]
    DuplicateParaphrase(String),
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("records from several datasets: {0} and {1}")]
    MixedDatasets(DatasetKey, DatasetKey),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Knobs shared by all attacks.
#[derive(Debug, Clone, Default)]
pub struct AttackOptions {
    pub targets: InputTargets,
    pub adjacency: KeyboardAdjacency,
    pub paraphrases: Option<ParaphraseMap>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

/// The perturbed copy of one dataset's test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackSet {
    pub attack: AttackKind,
    pub dataset: DatasetKey,
    pub seed: u64,
    /// Sorted by original id.
    pub records: Vec<StanceRecord>,
    /// Perturbed id → original id.
    pub provenance: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceFile {
    attack: AttackKind,
    dataset: DatasetKey,
    seed: u64,
    provenance: BTreeMap<String, String>,
}

pub fn perturbed_id(original: &str, attack: AttackKind) -> String {
    format!("{original}~{}", attack.as_str())
}

/// Spelling attack on one record with the QWERTY layout.
pub fn misspell(record: &StanceRecord, seed: u64, targets: InputTargets) -> StanceRecord {
    misspell_with(record, seed, targets, &KeyboardAdjacency::qwerty())
}

/// Spelling attack on one record. Topic and comment draw from separate streams.
/// Flags end up in `meta.spelling_flag_topic` / `meta.spelling_flag_comment`.
pub fn misspell_with(
    record: &StanceRecord,
    seed: u64,
    targets: InputTargets,
    adjacency: &KeyboardAdjacency,
) -> StanceRecord {
    let mut out = record.clone();
    let mut rng = derive_rng(seed, &["spelling", &record.id, "comment"]);
    let m = misspell_text(&record.comment, adjacency, &mut rng);
    out.comment = m.text;
    if let Some(flag) = m.flag {
        out.meta.insert("spelling_flag_comment".into(), flag.as_str().into());
    }
    if targets == InputTargets::Both {
        if let Some(topic) = &record.topic {
            let mut rng = derive_rng(seed, &["spelling", &record.id, "topic"]);
            let m = misspell_text(topic, adjacency, &mut rng);
            out.topic = Some(m.text);
            if let Some(flag) = m.flag {
                out.meta.insert("spelling_flag_topic".into(), flag.as_str().into());
            }
        }
    }
    out
}

fn perturb_one(
    record: &StanceRecord,
    attack: AttackKind,
    seed: u64,
    options: &AttackOptions,
) -> Result<StanceRecord, AttackError> {
    let mut out = match attack {
        AttackKind::Spelling => misspell_with(record, seed, options.targets, &options.adjacency),
        AttackKind::Negation => negate(record, options.targets),
        AttackKind::Paraphrase => {
            let map = options.paraphrases.as_ref().ok_or(AttackError::MissingParaphrases)?;
            apply_paraphrase(record, map)?
        }
    };
    out.id = perturbed_id(&record.id, attack);
    out.meta.insert("source_id".into(), record.id.clone());
    out.meta.insert("attack".into(), attack.as_str().into());
    Ok(out)
}

/// Perturbs every record of `test`.
pub fn build_attack_set(
    test: &[StanceRecord],
    attack: AttackKind,
    seed: u64,
    options: &AttackOptions,
) -> Result<AttackSet, AttackError> {
    let first = test.first().ok_or(AttackError::EmptyTestSplit)?;
    if let Some(other) = test.iter().find(|r| r.dataset != first.dataset) {
        return Err(AttackError::MixedDatasets(first.dataset, other.dataset));
    }
    if attack == AttackKind::Paraphrase {
        let map = options.paraphrases.as_ref().ok_or(AttackError::MissingParaphrases)?;
        let missing: Vec<String> = test
            .iter()
            .filter(|r| map.get(&r.id).is_none())
            .map(|r| r.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(AttackError::Uncovered(missing));
        }
    }

    let mut sorted: Vec<&StanceRecord> = test.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let run = || -> Result<Vec<StanceRecord>, AttackError> {
        sorted
            .par_iter()
            .map(|r| perturb_one(r, attack, seed, options))
            .collect()
    };
    let records = match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| AttackError::Pool(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let provenance = records
        .iter()
        .zip(&sorted)
        .map(|(p, o)| (p.id.clone(), o.id.clone()))
        .collect();
    Ok(AttackSet {
        attack,
        dataset: first.dataset,
        seed,
        records,
        provenance,
    })
}

impl AttackSet {
    pub fn file_name(dataset: DatasetKey, attack: AttackKind) -> String {
        format!("{dataset}.{}.jsonl", attack.as_str())
    }

    pub fn provenance_file_name(dataset: DatasetKey, attack: AttackKind) -> String {
        format!("{dataset}.{}.provenance.json", attack.as_str())
    }

    /// Writes the records and the provenance map into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), AttackError> {
        write_jsonl(&dir.join(Self::file_name(self.dataset, self.attack)), &self.records)?;
        let file = ProvenanceFile {
            attack: self.attack,
            dataset: self.dataset,
            seed: self.seed,
            provenance: self.provenance.clone(),
        };
        let path = dir.join(Self::provenance_file_name(self.dataset, self.attack));
        std::fs::write(path, serde_json::to_vec_pretty(&file)?)?;
        Ok(())
    }

    pub fn read(dir: &Path, dataset: DatasetKey, attack: AttackKind) -> Result<Self, AttackError> {
        let records = read_jsonl(&dir.join(Self::file_name(dataset, attack)))?;
        let bytes = std::fs::read(dir.join(Self::provenance_file_name(dataset, attack)))?;
        let file: ProvenanceFile = serde_json::from_slice(&bytes)?;
        Ok(AttackSet {
            attack: file.attack,
            dataset: file.dataset,
            seed: file.seed,
            records,
            provenance: file.provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Split;

    fn sample(n: usize) -> Vec<StanceRecord> {
        (0..n)
            .map(|i| {
                StanceRecord::new(
                    DatasetKey::Perspectrum,
                    Split::Test,
                    i,
                    Some("School Day Should Be Extended".into()),
                    format!("Comment number {i} is much easier for parents"),
                    if i % 2 == 0 { "support" } else { "undermine" },
                )
            })
            .collect()
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let test = sample(64);
        let one = build_attack_set(
            &test,
            AttackKind::Spelling,
            5,
            &AttackOptions {
                workers: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        let many = build_attack_set(
            &test,
            AttackKind::Spelling,
            5,
            &AttackOptions {
                workers: Some(8),
                ..Default::default()
            },
        )
        .unwrap();
        let mut reversed = test.clone();
        reversed.reverse();
        let rev = build_attack_set(&reversed, AttackKind::Spelling, 5, &AttackOptions::default()).unwrap();
        assert_eq!(one, many);
        assert_eq!(one, rev);
        let other = build_attack_set(&test, AttackKind::Spelling, 6, &AttackOptions::default()).unwrap();
        assert_ne!(one.records, other.records);
    }

    #[test]
    fn provenance_and_labels() {
        let test = sample(10);
        let set = build_attack_set(&test, AttackKind::Negation, 0, &AttackOptions::default()).unwrap();
        assert_eq!(set.records.len(), 10);
        for r in &set.records {
            let src = &r.meta["source_id"];
            assert_eq!(set.provenance[&r.id], *src);
            assert_eq!(r.id, perturbed_id(src, AttackKind::Negation));
            let orig = test.iter().find(|o| &o.id == src).unwrap();
            assert_eq!(r.gold, orig.gold);
            assert!(r.comment.starts_with(NEGATION_PREFIX));
        }
        let dir = tempfile::tempdir().unwrap();
        set.write(dir.path()).unwrap();
        assert_eq!(
            AttackSet::read(dir.path(), DatasetKey::Perspectrum, AttackKind::Negation).unwrap(),
            set
        );
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            build_attack_set(&[], AttackKind::Negation, 0, &AttackOptions::default()),
            Err(AttackError::EmptyTestSplit)
        ));
        let mut test = sample(2);
        assert!(matches!(
            build_attack_set(&test, AttackKind::Paraphrase, 0, &AttackOptions::default()),
            Err(AttackError::MissingParaphrases)
        ));
        let mut map = ParaphraseMap::new();
        map.insert(test[0].id.clone(), None, "reworded");
        let opts = AttackOptions {
            paraphrases: Some(map),
            ..Default::default()
        };
        assert!(matches!(
            build_attack_set(&test, AttackKind::Paraphrase, 0, &opts),
            Err(AttackError::Uncovered(ids)) if ids == [test[1].id.clone()]
        ));
        test[1].dataset = DatasetKey::Arc;
        assert!(matches!(
            build_attack_set(&test, AttackKind::Negation, 0, &AttackOptions::default()),
            Err(AttackError::MixedDatasets(..))
        ));
    }

    #[test]
    fn spelling_flags_in_meta() {
        let r = StanceRecord::new(DatasetKey::Scd, Split::Test, 0, None, "ok no", "for");
        let out = misspell(&r, 1, InputTargets::Both);
        assert_eq!(out.comment, "ok no");
        assert_eq!(out.meta["spelling_flag_comment"], "no_eligible_word");
    }
}
