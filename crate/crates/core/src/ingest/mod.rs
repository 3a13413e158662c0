//! Raw dataset ingestion, split construction and low-resource subsampling.
//!
//! Adapters are TOML files mapping raw columns onto [`StanceRecord`] fields;
//! one is bundled per dataset under `config/adapters/`.
//!
//! [`StanceRecord`]: crate::records::StanceRecord

mod adapter;
mod split;
mod subsample;

use thiserror::Error;

use crate::records::{DatasetKey, RecordError};

pub use adapter::{builtin_adapter, normalize, AdapterConfig, ColumnMap, JoinSpec, JoinTarget, RawFile, RawFormat};
pub use split::{
    apply_assignment, generate_split, read_manifest, topic_key, write_manifest, SplitAssignment, SplitManifest,
    SplitRule,
};
pub use subsample::{apply_sample, round_half_up, subsample_train, LowResourceSample, LOW_RESOURCE_RATIOS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("adapter config: {0}")]
    Config(String),
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("{path}:{line}: invalid record: {message}")]
    Invalid { path: String, line: usize, message: String },
    #[error("insufficient topics for {dataset}: need {needed}, found {found}")]
    InsufficientTopics {
        dataset: DatasetKey,
        needed: usize,
        found: usize,
    },
    #[error("topic `{0}` is not assigned to any split")]
    UnassignedTopic(String),
    #[error("topic `{0}` listed in the partition has no records")]
    EmptyTopic(String),
    #[error("record {0} has no topic or group")]
    MissingTopic(String),
    #[error("records from several datasets: {0} and {1}")]
    MixedDatasets(DatasetKey, DatasetKey),
    #[error("ratio {0} outside (0, 1]")]
    BadRatio(f64),
    #[error("record {0} is not part of the assignment")]
    Unassigned(String),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
