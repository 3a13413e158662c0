//! Stance-detection robustness benchmark: dataset normalization, adversarial
//! attack sets, correctness estimation, prediction collection and the
//! performance and robustness metrics.

pub mod attacks;
pub mod config;
pub mod correctness;
pub mod evaluate;
pub mod ingest;
pub mod metrics;
pub mod modelio;
pub mod records;
pub mod report;
pub mod seeding;
pub mod wordpiece;

pub use attacks::AttackSet;
pub use config::RunConfig;
pub use correctness::CorrectnessEstimate;
pub use ingest::{LowResourceSample, SplitAssignment};
pub use metrics::ScoreMatrix;
pub use modelio::PredictionSet;
pub use records::{AttackKind, DatasetKey, EvalSet, LabelScheme, Split, StanceRecord};
