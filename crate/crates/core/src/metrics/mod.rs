//! Classification metrics, seed aggregation and the robustness metric stack.

mod classification;
mod robustness;

use thiserror::Error;

use crate::records::AttackKind;

pub use classification::{
    accuracy, aggregate_seeds, f1_macro, f1_macro_excluding, f1_micro, fnc1_score, original_metric, ConfusionMatrix,
};
pub use robustness::{
    potency, raw_potency, resilience, resilience_rel, resilience_rel_attack, summarize, summarize_with, AttackSummary,
    DatasetScore, RelativeFormula, RobustnessSummary, ScoreEntry, ScoreMatrix, SystemSummary,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no samples")]
    Empty,
    #[error("label `{0}` is not part of the scheme")]
    UnknownLabel(String),
    #[error("excluded class `{0}` is not part of the scheme")]
    ExcludedNotInScheme(String),
    #[error("scheme defines no related group")]
    NoRelatedGroup,
    #[error("no score for system `{system}` on `{eval_set}`")]
    MissingEntry { system: String, eval_set: String },
    #[error("no correctness ratio for attack `{0}`")]
    MissingCorrectness(AttackKind),
    #[error("correctness ratios sum to zero")]
    ZeroCorrectness,
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
}
