//! Prediction collection from external systems.
//!
//! The wire protocol is a `POST /predict` whose body is a JSON array of
//! [`PredictionRequest`] objects; the reply is a JSON array of
//! [`Prediction`] objects matched back by id. Fixtures and cached results use
//! the same `{id, label}` JSON-lines format.
//!
//! Cache layout: `<cache>/<k[0..2]>/<k>.jsonl`, where `k` is the hex SHA-256
//! of system, seed, eval set, dataset and the hash of the request batch.

mod client;
pub mod server;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::{DatasetKey, EvalSet, LabelScheme, RecordError, StanceRecord};

pub use client::{cache_key, request_predictions, ClientOptions, Endpoint};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("duplicate prediction for {0}")]
    DuplicateId(String),
    #[error("no prediction for {} record(s): {}", .0.len(), .0.join(", "))]
    Missing(Vec<String>),
    #[error("predictions for unknown record(s): {}", .0.join(", "))]
    Unexpected(Vec<String>),
    #[error("label `{label}` for {id} is not in the scheme")]
    BadLabel { id: String, label: String },
    #[error("server answered {status}: {body}")]
    Http { status: u16, body: String },
    #[error("endpoint unreachable after {attempts} attempts: {message}")]
    Unreachable { attempts: usize, message: String },
    #[error("requests written to {0}; waiting for responses")]
    AwaitingResponses(PathBuf),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One input sent to a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRequest {
    pub id: String,
    pub dataset: DatasetKey,
    pub eval_set: EvalSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub comment: String,
}

impl PredictionRequest {
    pub fn from_record(record: &StanceRecord, eval_set: EvalSet) -> Self {
        PredictionRequest {
            id: record.id.clone(),
            dataset: record.dataset,
            eval_set,
            topic: record.topic.clone(),
            comment: record.comment.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: String,
}

/// Labels of one system run on one eval set of one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub system: String,
    pub seed: u64,
    pub dataset: DatasetKey,
    pub eval_set: EvalSet,
    pub labels: BTreeMap<String, String>,
}

impl PredictionSet {
    /// Builds a set covering exactly `records`, with labels from `scheme`.
    pub fn assemble(
        system: &str,
        seed: u64,
        dataset: DatasetKey,
        eval_set: EvalSet,
        records: &[StanceRecord],
        predictions: Vec<Prediction>,
        scheme: &LabelScheme,
    ) -> Result<Self, ModelIoError> {
        let wanted: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
        let mut labels = BTreeMap::new();
        for p in predictions {
            if labels.contains_key(&p.id) {
                return Err(ModelIoError::DuplicateId(p.id));
            }
            labels.insert(p.id, p.label);
        }
        let unexpected: Vec<String> = labels
            .keys()
            .filter(|k| !wanted.contains(k.as_str()))
            .cloned()
            .collect();
        if !unexpected.is_empty() {
            return Err(ModelIoError::Unexpected(unexpected));
        }
        let missing: Vec<String> = wanted
            .iter()
            .filter(|id| !labels.contains_key(**id))
            .map(|s| s.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ModelIoError::Missing(missing));
        }
        if let Some((id, label)) = labels.iter().find(|(_, l)| !scheme.contains(l)) {
            return Err(ModelIoError::BadLabel {
                id: id.clone(),
                label: label.clone(),
            });
        }
        Ok(PredictionSet {
            system: system.to_string(),
            seed,
            dataset,
            eval_set,
            labels,
        })
    }

    /// Predicted labels aligned with `records`.
    pub fn aligned<'a>(&'a self, records: &[StanceRecord]) -> Result<Vec<&'a str>, ModelIoError> {
        let missing: Vec<String> = records
            .iter()
            .filter(|r| !self.labels.contains_key(&r.id))
            .map(|r| r.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(ModelIoError::Missing(missing));
        }
        Ok(records.iter().map(|r| self.labels[&r.id].as_str()).collect())
    }

    pub fn predictions(&self) -> Vec<Prediction> {
        self.labels
            .iter()
            .map(|(id, label)| Prediction {
                id: id.clone(),
                label: label.clone(),
            })
            .collect()
    }

    /// `{id, label}` lines sorted by id.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in self.predictions() {
            out.push_str(&serde_json::to_string(&p).expect("plain strings serialize"));
            out.push('\n');
        }
        out
    }
}

/// `<dir>/<system>/seed<seed>/<dataset>.<eval_set>.jsonl`
pub fn prediction_path(dir: &Path, system: &str, seed: u64, dataset: DatasetKey, eval_set: EvalSet) -> PathBuf {
    dir.join(system)
        .join(format!("seed{seed}"))
        .join(format!("{dataset}.{}.jsonl", eval_set.as_str()))
}

/// Reads `{id, label}` lines. Blank lines are skipped; an empty file yields an
/// empty list and a warning.
pub fn load_fixture(path: &Path) -> Result<Vec<Prediction>, ModelIoError> {
    let text = std::fs::read_to_string(path)?;
    parse_fixture(&text, &path.display().to_string())
}

fn parse_fixture(text: &str, origin: &str) -> Result<Vec<Prediction>, ModelIoError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line).map_err(|e| ModelIoError::Malformed {
            path: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(p.id.clone()) {
            return Err(ModelIoError::DuplicateId(p.id));
        }
        out.push(p);
    }
    if out.is_empty() {
        log::warn!("{origin}: no predictions");
    }
    Ok(out)
}

pub fn write_prediction_set(dir: &Path, set: &PredictionSet) -> Result<PathBuf, ModelIoError> {
    let path = prediction_path(dir, &set.system, set.seed, set.dataset, set.eval_set);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, set.to_jsonl())?;
    Ok(path)
}

/// Loads a prediction set from the fixture layout written by [`write_prediction_set`].
pub fn read_prediction_set(
    dir: &Path,
    system: &str,
    seed: u64,
    eval_set: EvalSet,
    records: &[StanceRecord],
    scheme: &LabelScheme,
) -> Result<PredictionSet, ModelIoError> {
    let dataset = scheme.dataset;
    let preds = load_fixture(&prediction_path(dir, system, seed, dataset, eval_set))?;
    PredictionSet::assemble(system, seed, dataset, eval_set, records, preds, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{builtin_scheme, Split};

    fn records(n: usize) -> Vec<StanceRecord> {
        (0..n)
            .map(|i| StanceRecord::new(DatasetKey::Ibmcs, Split::Test, i, Some("t".into()), "c", "pro"))
            .collect()
    }

    #[test]
    fn fixture_coverage() {
        let rs = records(3);
        let scheme = builtin_scheme(DatasetKey::Ibmcs);
        let preds: Vec<Prediction> = rs
            .iter()
            .map(|r| Prediction {
                id: r.id.clone(),
                label: "con".into(),
            })
            .collect();
        let set =
            PredictionSet::assemble("s", 0, DatasetKey::Ibmcs, EvalSet::Test, &rs, preds.clone(), &scheme).unwrap();
        assert_eq!(set.labels.len(), 3);

        let err = PredictionSet::assemble(
            "s",
            0,
            DatasetKey::Ibmcs,
            EvalSet::Test,
            &rs,
            preds[..2].to_vec(),
            &scheme,
        )
        .unwrap_err();
        assert!(
            matches!(&err, ModelIoError::Missing(ids) if ids == &[rs[2].id.clone()]),
            "{err}"
        );
        assert!(err.to_string().contains(&rs[2].id));

        let mut bad = preds.clone();
        bad[0].label = "maybe".into();
        assert!(matches!(
            PredictionSet::assemble("s", 0, DatasetKey::Ibmcs, EvalSet::Test, &rs, bad, &scheme),
            Err(ModelIoError::BadLabel { .. })
        ));
    }

    #[test]
    fn fixture_parsing() {
        let err = parse_fixture("{\"id\":\"a\",\"label\":\"pro\"}\n{\"id\":\"b\"\n", "f").unwrap_err();
        assert!(matches!(err, ModelIoError::Malformed { line: 2, .. }), "{err}");
        let err = parse_fixture(
            "{\"id\":\"a\",\"label\":\"pro\"}\n{\"id\":\"a\",\"label\":\"con\"}\n",
            "f",
        )
        .unwrap_err();
        assert!(matches!(err, ModelIoError::DuplicateId(_)));
        assert!(parse_fixture("", "f").unwrap().is_empty());
    }

    #[test]
    fn layout_round_trip() {
        let rs = records(4);
        let scheme = builtin_scheme(DatasetKey::Ibmcs);
        let preds = rs
            .iter()
            .map(|r| Prediction {
                id: r.id.clone(),
                label: "pro".into(),
            })
            .collect();
        let set = PredictionSet::assemble("bert", 2, DatasetKey::Ibmcs, EvalSet::Test, &rs, preds, &scheme).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_prediction_set(dir.path(), &set).unwrap();
        assert_eq!(
            read_prediction_set(dir.path(), "bert", 2, EvalSet::Test, &rs, &scheme).unwrap(),
            set
        );
    }
}
