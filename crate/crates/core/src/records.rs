//! Unified record model shared by every stage of the benchmark.
//!
//! Each of the ten stance datasets keeps its native label set. A
//! [`LabelScheme`] describes that set together with the class distribution and
//! the metric the dataset's authors originally reported.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("unknown dataset key `{0}`")]
    UnknownDataset(String),
    #[error("unknown split `{0}` (expected train, dev or test)")]
    UnknownSplit(String),
    #[error("scheme for {scheme} applied to a {record} record")]
    SchemeMismatch { record: DatasetKey, scheme: DatasetKey },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The ten datasets of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKey {
    Arc,
    Argmin,
    Fnc1,
    Iac1,
    Ibmcs,
    Perspectrum,
    Scd,
    Semeval2016t6,
    Semeval2019t7,
    Snopes,
}

impl DatasetKey {
    pub const ALL: [DatasetKey; 10] = [
        DatasetKey::Arc,
        DatasetKey::Argmin,
        DatasetKey::Fnc1,
        DatasetKey::Iac1,
        DatasetKey::Ibmcs,
        DatasetKey::Perspectrum,
        DatasetKey::Scd,
        DatasetKey::Semeval2016t6,
        DatasetKey::Semeval2019t7,
        DatasetKey::Snopes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKey::Arc => "arc",
            DatasetKey::Argmin => "argmin",
            DatasetKey::Fnc1 => "fnc1",
            DatasetKey::Iac1 => "iac1",
            DatasetKey::Ibmcs => "ibmcs",
            DatasetKey::Perspectrum => "perspectrum",
            DatasetKey::Scd => "scd",
            DatasetKey::Semeval2016t6 => "semeval2016t6",
            DatasetKey::Semeval2019t7 => "semeval2019t7",
            DatasetKey::Snopes => "snopes",
        }
    }

    /// Datasets whose topic is not part of the data.
    pub fn has_implicit_topic(self) -> bool {
        matches!(self, DatasetKey::Scd | DatasetKey::Semeval2019t7)
    }

    /// Published (train, dev, test) sizes of the benchmark splits.
    pub fn split_sizes(self) -> SplitSizes {
        let (train, dev, test) = match self {
            DatasetKey::Arc => (12_382, 1_851, 3_559),
            DatasetKey::Argmin => (6_845, 1_568, 2_726),
            DatasetKey::Fnc1 => (42_476, 7_496, 25_413),
            DatasetKey::Iac1 => (4_227, 454, 924),
            DatasetKey::Ibmcs => (935, 104, 1_355),
            DatasetKey::Perspectrum => (6_978, 2_071, 2_773),
            DatasetKey::Scd => (3_251, 624, 964),
            DatasetKey::Semeval2016t6 => (2_497, 417, 1_249),
            DatasetKey::Semeval2019t7 => (5_217, 1_485, 1_827),
            DatasetKey::Snopes => (14_416, 1_868, 3_154),
        };
        SplitSizes { train, dev, test }
    }
}

impl fmt::Display for DatasetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKey {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| RecordError::UnknownDataset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "development" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(RecordError::UnknownSplit(other.to_string())),
        }
    }
}

/// The three adversarial attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Spelling,
    Negation,
    Paraphrase,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [AttackKind::Spelling, AttackKind::Negation, AttackKind::Paraphrase];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Spelling => "spelling",
            AttackKind::Negation => "negation",
            AttackKind::Paraphrase => "paraphrase",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackKind::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown attack `{s}` (expected spelling, negation or paraphrase)"))
    }
}

/// The clean test split or one of the attack sets derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalSet {
    Test,
    Attack(AttackKind),
}

impl EvalSet {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalSet::Test => "test",
            EvalSet::Attack(a) => a.as_str(),
        }
    }

    pub fn attack(self) -> Option<AttackKind> {
        match self {
            EvalSet::Test => None,
            EvalSet::Attack(a) => Some(a),
        }
    }
}

impl fmt::Display for EvalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvalSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "test" {
            Ok(EvalSet::Test)
        } else {
            s.parse().map(EvalSet::Attack)
        }
    }
}

impl Serialize for EvalSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EvalSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }

    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }

    pub fn bump(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Dev => self.dev += 1,
            Split::Test => self.test += 1,
        }
    }
}

/// One (topic, comment, stance) sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceRecord {
    pub id: String,
    pub dataset: DatasetKey,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub comment: String,
    pub gold: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl StanceRecord {
    /// Creates a record whose id is derived from its origin (see [`record_id`]).
    pub fn new(
        dataset: DatasetKey,
        split: Split,
        index: usize,
        topic: Option<String>,
        comment: impl Into<String>,
        gold: impl Into<String>,
    ) -> Self {
        StanceRecord {
            id: record_id(dataset, split.as_str(), index),
            dataset,
            split,
            topic,
            comment: comment.into(),
            gold: gold.into(),
            meta: BTreeMap::new(),
        }
    }
}

/// Stable content-addressed id: 16 hex chars of SHA-256 over
/// `dataset \x1f origin \x1f index`, where `origin` names the raw file or split
/// the record was read from and `index` is its position there.
pub fn record_id(dataset: DatasetKey, origin: &str, index: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(dataset.as_str().as_bytes());
    hasher.update([0x1f]);
    hasher.update(origin.as_bytes());
    hasher.update([0x1f]);
    hasher.update(index.to_string().as_bytes());
    let digest = hasher.finalize();
    format!("{}-{}", dataset.as_str(), hex::encode(&digest[..8]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginalMetric {
    F1Macro,
    F1Micro,
    Accuracy,
    Fnc1,
    F1MacroExcluding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScheme {
    pub dataset: DatasetKey,
    pub classes: Vec<String>,
    pub class_distribution: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related_group: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded_for_original_metric: Option<String>,
    pub original_metric: OriginalMetric,
}

impl LabelScheme {
    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.class_index(label).is_some()
    }

    /// Expected fraction of `label`, if it belongs to the scheme.
    pub fn fraction(&self, label: &str) -> Option<f64> {
        self.class_index(label).map(|i| self.class_distribution[i])
    }

    /// The most frequent class.
    pub fn majority_class(&self) -> &str {
        let (idx, _) = self
            .class_distribution
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, &p)| if p > best.1 { (i, p) } else { best });
        &self.classes[idx]
    }

    /// Checks the scheme's own invariants.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.classes.len() != self.class_distribution.len() {
            problems.push("class_distribution length differs from classes".to_string());
        }
        let sum: f64 = self.class_distribution.iter().sum();
        if (sum - 1.0).abs() > 0.01 {
            problems.push(format!("class_distribution sums to {sum}"));
        }
        if let Some(excluded) = &self.excluded_for_original_metric {
            if !self.contains(excluded) {
                problems.push(format!("excluded class `{excluded}` not in classes"));
            }
        }
        if let Some(group) = &self.related_group {
            for c in group {
                if !self.contains(c) {
                    problems.push(format!("related class `{c}` not in classes"));
                }
            }
        }
        problems
    }
}

fn scheme(
    dataset: DatasetKey,
    classes: &[(&str, f64)],
    related: Option<&[&str]>,
    excluded: Option<&str>,
    original_metric: OriginalMetric,
) -> LabelScheme {
    LabelScheme {
        dataset,
        classes: classes.iter().map(|(c, _)| c.to_string()).collect(),
        class_distribution: classes.iter().map(|(_, p)| *p).collect(),
        related_group: related.map(|r| r.iter().map(|s| s.to_string()).collect()),
        excluded_for_original_metric: excluded.map(str::to_string),
        original_metric,
    }
}

const FNC_RELATED: &[&str] = &["agree", "disagree", "discuss"];

/// Label scheme of a single dataset.
pub fn builtin_scheme(dataset: DatasetKey) -> LabelScheme {
    use OriginalMetric::*;
    match dataset {
        DatasetKey::Arc => scheme(
            dataset,
            &[
                ("unrelated", 0.75),
                ("disagree", 0.10),
                ("agree", 0.09),
                ("discuss", 0.06),
            ],
            Some(FNC_RELATED),
            None,
            F1Macro,
        ),
        DatasetKey::Argmin => scheme(
            dataset,
            &[("argument_against", 0.56), ("argument_for", 0.44)],
            None,
            None,
            F1Macro,
        ),
        DatasetKey::Fnc1 => scheme(
            dataset,
            &[
                ("unrelated", 0.73),
                ("discuss", 0.18),
                ("agree", 0.07),
                ("disagree", 0.02),
            ],
            Some(FNC_RELATED),
            None,
            Fnc1,
        ),
        DatasetKey::Iac1 => scheme(
            dataset,
            &[("pro", 0.56), ("anti", 0.34), ("other", 0.10)],
            None,
            None,
            F1Macro,
        ),
        DatasetKey::Ibmcs => scheme(dataset, &[("pro", 0.55), ("con", 0.45)], None, None, Accuracy),
        DatasetKey::Perspectrum => scheme(dataset, &[("support", 0.52), ("undermine", 0.48)], None, None, F1Micro),
        DatasetKey::Scd => scheme(dataset, &[("for", 0.60), ("against", 0.40)], None, None, F1Macro),
        DatasetKey::Semeval2016t6 => scheme(
            dataset,
            &[("against", 0.51), ("favor", 0.25), ("none", 0.24)],
            None,
            Some("none"),
            F1MacroExcluding,
        ),
        DatasetKey::Semeval2019t7 => scheme(
            dataset,
            &[("comment", 0.72), ("support", 0.14), ("query", 0.07), ("deny", 0.07)],
            None,
            None,
            F1Macro,
        ),
        DatasetKey::Snopes => scheme(dataset, &[("support", 0.74), ("refute", 0.26)], None, None, F1Macro),
    }
}

/// Schemes for all ten datasets.
pub fn builtin_schemes() -> BTreeMap<DatasetKey, LabelScheme> {
    DatasetKey::ALL.into_iter().map(|k| (k, builtin_scheme(k))).collect()
}

/// Looks up a scheme by its textual dataset key.
pub fn lookup_scheme(key: &str) -> Option<LabelScheme> {
    key.parse::<DatasetKey>().ok().map(builtin_scheme)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyComment,
    EmptyTopic,
    LabelNotInScheme(String),
    DuplicateId(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyComment => f.write_str("comment empty"),
            Violation::EmptyTopic => f.write_str("topic empty"),
            Violation::LabelNotInScheme(l) => write!(f, "label not in scheme: `{l}`"),
            Violation::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
        }
    }
}

/// Checks a single record against its dataset's scheme.
///
/// Returns the (possibly empty) list of violated invariants. Fails only when the
/// scheme belongs to another dataset.
pub fn validate_record(record: &StanceRecord, scheme: &LabelScheme) -> Result<Vec<Violation>, RecordError> {
    if record.dataset != scheme.dataset {
        return Err(RecordError::SchemeMismatch {
            record: record.dataset,
            scheme: scheme.dataset,
        });
    }
    let mut violations = Vec::new();
    if record.comment.trim().is_empty() {
        violations.push(Violation::EmptyComment);
    }
    if matches!(&record.topic, Some(t) if t.trim().is_empty()) {
        violations.push(Violation::EmptyTopic);
    }
    if !scheme.contains(&record.gold) {
        violations.push(Violation::LabelNotInScheme(record.gold.clone()));
    }
    Ok(violations)
}

/// Validates every record plus id uniqueness within (dataset, split).
pub fn validate_collection(records: &[StanceRecord]) -> Vec<(usize, Violation)> {
    let schemes = builtin_schemes();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let violations = validate_record(r, &schemes[&r.dataset]).expect("scheme by dataset");
        out.extend(violations.into_iter().map(|v| (i, v)));
        if !seen.insert((r.dataset, r.split, r.id.as_str())) {
            out.push((i, Violation::DuplicateId(r.id.clone())));
        }
    }
    out
}

/// Reads one JSON value per non-empty line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, RecordError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| RecordError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), RecordError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// `<dataset>.<split>.jsonl`
pub fn split_file_name(dataset: DatasetKey, split: Split) -> String {
    format!("{dataset}.{split}.jsonl")
}

/// Reads `<dataset>.<split>.jsonl` from `dir`.
pub fn read_split(dir: &Path, dataset: DatasetKey, split: Split) -> Result<Vec<StanceRecord>, RecordError> {
    read_jsonl(&dir.join(split_file_name(dataset, split)))
}

/// Writes records grouped into `<dataset>.<split>.jsonl` files, sorted by id.
/// Every split file is written, including empty ones.
pub fn write_splits(dir: &Path, dataset: DatasetKey, records: &[StanceRecord]) -> Result<(), RecordError> {
    for split in Split::ALL {
        let mut part: Vec<&StanceRecord> = records
            .iter()
            .filter(|r| r.dataset == dataset && r.split == split)
            .collect();
        part.sort_by(|a, b| a.id.cmp(&b.id));
        write_jsonl(&dir.join(split_file_name(dataset, split)), &part)?;
    }
    Ok(())
}

/// Distinct classes occurring in `records`, in scheme order.
pub fn observed_classes<'a>(scheme: &'a LabelScheme, records: &[StanceRecord]) -> Vec<&'a str> {
    let seen: BTreeSet<&str> = records.iter().map(|r| r.gold.as_str()).collect();
    scheme
        .classes
        .iter()
        .map(String::as_str)
        .filter(|c| seen.contains(c))
        .collect()
}
