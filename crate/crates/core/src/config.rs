//! Run configuration shared by the CLI commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::InputTargets;
use crate::correctness::DEFAULT_SAMPLE_SIZE;
use crate::ingest::LOW_RESOURCE_RATIOS;
use crate::records::{AttackKind, DatasetKey};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Overrides the run-level fixture directory for this system.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectnessConfig {
    pub sample_size: usize,
    pub judgments: Option<PathBuf>,
}

impl Default for CorrectnessConfig {
    fn default() -> Self {
        CorrectnessConfig {
            sample_size: DEFAULT_SAMPLE_SIZE,
            judgments: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub targets: InputTargets,
    /// Directory of `<dataset>.paraphrase.jsonl` files.
    pub paraphrase_dir: Option<PathBuf>,
    /// Keyboard adjacency TOML; QWERTY when absent.
    pub keyboard: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub raw_dir: PathBuf,
    /// Adapter TOML overrides, `<dataset>.toml`.
    pub adapter_dir: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub fixtures: Option<PathBuf>,
    /// Empty means every dataset whose inputs are present.
    pub datasets: Vec<DatasetKey>,
    /// Empty means every attack whose inputs are present.
    pub attacks: Vec<AttackKind>,
    /// Master seed for splits, attacks and sampling.
    pub seed: u64,
    /// Model seeds averaged in evaluation.
    pub seeds: Vec<u64>,
    pub ratios: Vec<f64>,
    pub systems: Vec<SystemConfig>,
    pub attack: AttackConfig,
    pub correctness: CorrectnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            raw_dir: PathBuf::from("raw"),
            adapter_dir: None,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            fixtures: None,
            datasets: Vec::new(),
            attacks: Vec::new(),
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            ratios: LOW_RESOURCE_RATIOS.to_vec(),
            systems: Vec::new(),
            attack: AttackConfig::default(),
            correctness: CorrectnessConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// Loads `path`; relative paths inside are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut config.raw_dir);
        fix(&mut config.data_dir);
        fix(&mut config.out_dir);
        for p in [
            config.adapter_dir.as_mut(),
            config.fixtures.as_mut(),
            config.attack.paraphrase_dir.as_mut(),
            config.attack.keyboard.as_mut(),
            config.correctness.judgments.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for s in &mut config.systems {
            if let Some(p) = s.fixtures.as_mut() {
                fix(p);
            }
        }
        Ok(config)
    }
}
