//! Correctness ratio `c_a` of an attack set.
//!
//! Negation is fixed at 1.0. Spelling is screened with the Flesch–Kincaid
//! grade level on a seeded sample per dataset. Paraphrase correctness comes
//! from manual judgments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::AttackSet;
use crate::records::{AttackKind, DatasetKey, StanceRecord};
use crate::seeding::derive_rng;

pub const DEFAULT_SAMPLE_SIZE: usize = 25;

#[derive(Debug, Error)]
pub enum CorrectnessError {
    #[error("text contains no words")]
    EmptyText,
    #[error("no samples to judge")]
    EmptySample,
    #[error("paraphrase correctness needs a manual judgment file")]
    MissingJudgments,
    #[error("no judgments for dataset {0}")]
    NoJudgmentsFor(DatasetKey),
    #[error("judged id {0} is not in the attack set")]
    UnknownJudgedId(String),
    #[error("duplicate judgment for {0}")]
    DuplicateJudgment(String),
    #[error("{path}:{line}: {message}")]
    BadJudgment { path: String, line: usize, message: String },
    #[error("original record {0} not found")]
    MissingOriginal(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fixed,
    FkScreen,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessEstimate {
    pub attack: AttackKind,
    pub c: f64,
    pub method: Method,
    pub sample_size: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_dataset: BTreeMap<DatasetKey, f64>,
}

fn is_vowel(b: u8) -> bool {
    matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y')
}

/// Vowel-group syllable estimate, never below 1.
///
/// Starts from the number of maximal `aeiouy` runs, then drops a final silent
/// `e` (kept in consonant + `le`), drops the `e` of `-ed` after a consonant
/// other than `t`/`d`, and adds one for consonant + `ier`/`iers`/`iest` when an
/// earlier vowel group exists.
pub fn count_syllables(word: &str) -> usize {
    let w: Vec<u8> = word
        .bytes()
        .filter(u8::is_ascii_alphabetic)
        .map(|b| b.to_ascii_lowercase())
        .collect();
    let n = w.len();
    let mut groups = 0usize;
    let mut prev = false;
    for &b in &w {
        let v = is_vowel(b);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let consonant_at = |i: usize| !is_vowel(w[i]);

    if n >= 2 && w[n - 1] == b'e' && consonant_at(n - 2) && groups > 1 {
        let consonant_le = n >= 3 && w[n - 2] == b'l' && consonant_at(n - 3);
        if !consonant_le {
            groups -= 1;
        }
    }
    if n >= 3 && w.ends_with(b"ed") && consonant_at(n - 3) && !matches!(w[n - 3], b't' | b'd') && groups > 1 {
        groups -= 1;
    }
    for suffix in [&b"ier"[..], b"iers", b"iest"] {
        if n > suffix.len() && w.ends_with(suffix) {
            let stem = &w[..n - suffix.len()];
            let before = stem[stem.len() - 1];
            if !is_vowel(before) && stem[..stem.len() - 1].iter().any(|&b| is_vowel(b)) {
                groups += 1;
            }
            break;
        }
    }
    groups.max(1)
}

/// Counts feeding the grade formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FkStats {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

impl FkStats {
    pub fn grade(&self) -> f64 {
        fk_formula(self.words, self.sentences, self.syllables)
    }
}

pub fn fk_formula(words: usize, sentences: usize, syllables: usize) -> f64 {
    let w = words as f64;
    0.39 * (w / sentences as f64) + 11.8 * (syllables as f64 / w) - 15.59
}

/// Words are whitespace tokens with at least one letter; sentences are maximal
/// runs of `.`, `!` or `?`, at least one.
pub fn fk_stats(text: &str) -> Result<FkStats, CorrectnessError> {
    let mut words = 0;
    let mut syllables = 0;
    for token in text.split_whitespace() {
        if token.chars().any(char::is_alphabetic) {
            words += 1;
            syllables += count_syllables(token);
        }
    }
    if words == 0 {
        return Err(CorrectnessError::EmptyText);
    }
    let mut sentences = 0;
    let mut in_run = false;
    for c in text.chars() {
        let terminal = matches!(c, '.' | '!' | '?');
        if terminal && !in_run {
            sentences += 1;
        }
        in_run = terminal;
    }
    Ok(FkStats {
        words,
        sentences: sentences.max(1),
        syllables,
    })
}

pub fn fk_grade(text: &str) -> Result<f64, CorrectnessError> {
    Ok(fk_stats(text)?.grade())
}

/// Text compared by the screen: topic and comment joined by a sentence break.
pub fn screen_text(record: &StanceRecord) -> String {
    match &record.topic {
        Some(topic) => format!("{topic}. {}", record.comment),
        None => record.comment.clone(),
    }
}

/// A pair passes when the perturbed grade does not exceed the original one.
pub fn pair_passes(original: &StanceRecord, perturbed: &StanceRecord) -> Result<bool, CorrectnessError> {
    Ok(fk_grade(&screen_text(perturbed))? <= fk_grade(&screen_text(original))?)
}

/// Fraction of (original, perturbed) pairs that pass the grade screen.
pub fn spelling_correctness(pairs: &[(&StanceRecord, &StanceRecord)]) -> Result<CorrectnessEstimate, CorrectnessError> {
    if pairs.is_empty() {
        return Err(CorrectnessError::EmptySample);
    }
    let verdicts: Vec<(DatasetKey, bool)> = pairs
        .par_iter()
        .map(|(o, p)| Ok((o.dataset, pair_passes(o, p)?)))
        .collect::<Result<_, CorrectnessError>>()?;
    let mut tally: BTreeMap<DatasetKey, (usize, usize)> = BTreeMap::new();
    for (d, ok) in &verdicts {
        let e = tally.entry(*d).or_default();
        e.0 += usize::from(*ok);
        e.1 += 1;
    }
    Ok(pooled(AttackKind::Spelling, Method::FkScreen, &tally))
}

fn pooled(attack: AttackKind, method: Method, tally: &BTreeMap<DatasetKey, (usize, usize)>) -> CorrectnessEstimate {
    let (hits, total) = tally.values().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    CorrectnessEstimate {
        attack,
        c: hits as f64 / total as f64,
        method,
        sample_size: total,
        per_dataset: tally.iter().map(|(d, (h, t))| (*d, *h as f64 / *t as f64)).collect(),
    }
}

/// One row of the manual judgment CSV `dataset,id,equal,note`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub dataset: DatasetKey,
    pub id: String,
    pub equal: bool,
    pub note: String,
}

#[derive(Deserialize)]
struct JudgmentRow {
    dataset: String,
    id: String,
    equal: String,
    #[serde(default)]
    note: Option<String>,
}

/// Reads a judgment CSV with a header row. Ids may be original or perturbed.
pub fn read_judgments(path: &Path) -> Result<Vec<Judgment>, CorrectnessError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.deserialize::<JudgmentRow>().enumerate() {
        let line = i + 2;
        let bad = |message: String| CorrectnessError::BadJudgment {
            path: path.display().to_string(),
            line,
            message,
        };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let dataset: DatasetKey = row
            .dataset
            .parse()
            .map_err(|e: crate::records::RecordError| bad(e.to_string()))?;
        let equal = match row.equal.as_str() {
            "1" | "true" | "yes" => true,
            "0" | "false" | "no" => false,
            other => return Err(bad(format!("equal must be 0 or 1, got `{other}`"))),
        };
        let id = original_id(&row.id).to_string();
        if !seen.insert(id.clone()) {
            return Err(CorrectnessError::DuplicateJudgment(id));
        }
        out.push(Judgment {
            dataset,
            id,
            equal,
            note: row.note.unwrap_or_default(),
        });
    }
    Ok(out)
}

fn original_id(id: &str) -> &str {
    id.split_once('~').map_or(id, |(orig, _)| orig)
}

/// Pooled fraction of judgments marked equal, with a per-dataset breakdown.
pub fn paraphrase_correctness(judgments: &[Judgment]) -> Result<CorrectnessEstimate, CorrectnessError> {
    if judgments.is_empty() {
        return Err(CorrectnessError::EmptySample);
    }
    let mut tally: BTreeMap<DatasetKey, (usize, usize)> = BTreeMap::new();
    for j in judgments {
        let e = tally.entry(j.dataset).or_default();
        e.0 += usize::from(j.equal);
        e.1 += 1;
    }
    Ok(pooled(AttackKind::Paraphrase, Method::Manual, &tally))
}

/// Seeded sample of up to `size` perturbed records of one set, sorted by id.
pub fn sample_set(set: &AttackSet, size: usize, seed: u64) -> Vec<&StanceRecord> {
    let mut rng = derive_rng(seed, &["correctness", set.attack.as_str(), set.dataset.as_str()]);
    let mut sorted: Vec<&StanceRecord> = set.records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut picked: Vec<&StanceRecord> = sorted
        .choose_multiple(&mut rng, size.min(sorted.len()))
        .copied()
        .collect();
    picked.sort_by(|a, b| a.id.cmp(&b.id));
    picked
}

/// Correctness of one attack across the given per-dataset sets.
///
/// `originals` must contain every original record referenced by the sets.
pub fn estimate_correctness(
    attack: AttackKind,
    sets: &[AttackSet],
    originals: &[StanceRecord],
    sample_size: usize,
    seed: u64,
    judgments: Option<&[Judgment]>,
) -> Result<CorrectnessEstimate, CorrectnessError> {
    match attack {
        AttackKind::Negation => Ok(CorrectnessEstimate {
            attack,
            c: 1.0,
            method: Method::Fixed,
            sample_size: 0,
            per_dataset: BTreeMap::new(),
        }),
        AttackKind::Spelling => {
            let by_id: HashMap<&str, &StanceRecord> = originals.iter().map(|r| (r.id.as_str(), r)).collect();
            let mut pairs = Vec::new();
            for set in sets.iter().filter(|s| s.attack == attack) {
                for p in sample_set(set, sample_size, seed) {
                    let src = set
                        .provenance
                        .get(&p.id)
                        .map(String::as_str)
                        .unwrap_or(original_id(&p.id));
                    let o = by_id
                        .get(src)
                        .ok_or_else(|| CorrectnessError::MissingOriginal(src.to_string()))?;
                    pairs.push((*o, p));
                }
            }
            spelling_correctness(&pairs)
        }
        AttackKind::Paraphrase => {
            let judgments = judgments.ok_or(CorrectnessError::MissingJudgments)?;
            let sets: Vec<&AttackSet> = sets.iter().filter(|s| s.attack == attack).collect();
            if !sets.is_empty() {
                let known: HashSet<&str> = sets
                    .iter()
                    .flat_map(|s| s.provenance.values().map(String::as_str))
                    .collect();
                if let Some(j) = judgments.iter().find(|j| !known.contains(j.id.as_str())) {
                    return Err(CorrectnessError::UnknownJudgedId(j.id.clone()));
                }
                if let Some(s) = sets.iter().find(|s| !judgments.iter().any(|j| j.dataset == s.dataset)) {
                    return Err(CorrectnessError::NoJudgmentsFor(s.dataset));
                }
            }
            paraphrase_correctness(judgments)
        }
    }
}

/// Writes estimates as a JSON object keyed by attack name.
pub fn write_estimates(path: &Path, estimates: &[CorrectnessEstimate]) -> Result<(), CorrectnessError> {
    let map: BTreeMap<AttackKind, &CorrectnessEstimate> = estimates.iter().map(|e| (e.attack, e)).collect();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(&map)?)?;
    Ok(())
}

pub fn read_estimates(path: &Path) -> Result<BTreeMap<AttackKind, CorrectnessEstimate>, CorrectnessError> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
