//! Scoring prediction sets against gold labels and folding them into a
//! [`ScoreMatrix`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{aggregate_seeds, f1_macro, original_metric, DatasetScore, MetricError, ScoreMatrix};
use crate::modelio::{ModelIoError, PredictionSet};
use crate::records::{AttackKind, DatasetKey, EvalSet, LabelScheme, StanceRecord};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error("no seeds for {system} on {dataset}/{eval_set}")]
    NoSeeds {
        system: String,
        dataset: DatasetKey,
        eval_set: String,
    },
}

/// F1 macro and original-metric score of one prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub f1_macro: f64,
    pub original: f64,
}

pub fn score_run(
    records: &[StanceRecord],
    predictions: &PredictionSet,
    scheme: &LabelScheme,
) -> Result<RunScore, EvalError> {
    let pred = predictions.aligned(records)?;
    let gold: Vec<&str> = records.iter().map(|r| r.gold.as_str()).collect();
    Ok(RunScore {
        f1_macro: f1_macro(&gold, &pred, scheme)?,
        original: original_metric(&gold, &pred, scheme)?,
    })
}

/// Seed-averaged scores of one (system, dataset, eval set).
pub fn aggregate_runs(
    system: &str,
    dataset: DatasetKey,
    eval_set: EvalSet,
    runs: &[RunScore],
) -> Result<DatasetScore, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::NoSeeds {
            system: system.to_string(),
            dataset,
            eval_set: eval_set.as_str().to_string(),
        });
    }
    let f1: Vec<f64> = runs.iter().map(|r| r.f1_macro).collect();
    let orig: Vec<f64> = runs.iter().map(|r| r.original).collect();
    Ok(DatasetScore {
        system: system.to_string(),
        eval_set,
        dataset,
        score: aggregate_seeds(&f1)?,
        original: Some(aggregate_seeds(&orig)?),
    })
}

/// Matrix of dataset-averaged F1 macro means.
pub fn build_matrix(
    per_dataset: Vec<DatasetScore>,
    correctness: &BTreeMap<AttackKind, f64>,
) -> Result<ScoreMatrix, EvalError> {
    Ok(ScoreMatrix::from_per_dataset(per_dataset, correctness)?)
}

/// Low-resource result of one system on one dataset at one ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowResourceScore {
    pub system: String,
    pub dataset: DatasetKey,
    pub ratio: f64,
    pub score: f64,
}
