//! Robustness metrics over a system × eval-set score matrix.
//!
//! * raw potency: mean reduction from a perfect score across systems
//! * potency: raw potency scaled by the attack's correctness ratio
//! * resilience: correctness-weighted mean of a system's attack scores
//! * relative resilience: correctness-weighted mean of `1 − drop`, where
//!   `drop = f(s, test) − f(s, a)`

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::records::{AttackKind, DatasetKey, EvalSet};

use super::MetricError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub system: String,
    pub eval_set: EvalSet,
    pub score: f64,
}

/// Per-dataset detail behind an aggregate score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub system: String,
    pub eval_set: EvalSet,
    pub dataset: DatasetKey,
    /// Seed-averaged F1 macro.
    pub score: f64,
    /// Seed-averaged score under the dataset's original metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct MatrixWire {
    scores: Vec<ScoreEntry>,
    #[serde(default)]
    correctness: BTreeMap<AttackKind, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    per_dataset: Vec<DatasetScore>,
}

/// `f(system, eval_set)` plus the correctness ratio of every attack.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixWire", into = "MatrixWire")]
pub struct ScoreMatrix {
    scores: BTreeMap<(String, EvalSet), f64>,
    correctness: BTreeMap<AttackKind, f64>,
    per_dataset: Vec<DatasetScore>,
}

impl TryFrom<MatrixWire> for ScoreMatrix {
    type Error = MetricError;

    fn try_from(wire: MatrixWire) -> Result<Self, Self::Error> {
        let mut m = ScoreMatrix::new();
        for e in wire.scores {
            m.insert(&e.system, e.eval_set, e.score)?;
        }
        for (a, c) in wire.correctness {
            m.set_correctness(a, c)?;
        }
        for d in &wire.per_dataset {
            check_unit(d.score)?;
        }
        m.per_dataset = wire.per_dataset;
        Ok(m)
    }
}

impl From<ScoreMatrix> for MatrixWire {
    fn from(m: ScoreMatrix) -> Self {
        MatrixWire {
            scores: m
                .scores
                .into_iter()
                .map(|((system, eval_set), score)| ScoreEntry {
                    system,
                    eval_set,
                    score,
                })
                .collect(),
            correctness: m.correctness,
            per_dataset: m.per_dataset,
        }
    }
}

fn check_unit(v: f64) -> Result<(), MetricError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(MetricError::OutOfRange(v))
    }
}

impl ScoreMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the matrix from per-dataset scores; each `f(s, e)` is the
    /// unweighted mean over the datasets present for that pair.
    pub fn from_per_dataset(
        per_dataset: Vec<DatasetScore>,
        correctness: &BTreeMap<AttackKind, f64>,
    ) -> Result<Self, MetricError> {
        let mut sums: BTreeMap<(String, EvalSet), (f64, usize)> = BTreeMap::new();
        for d in &per_dataset {
            check_unit(d.score)?;
            let slot = sums.entry((d.system.clone(), d.eval_set)).or_default();
            slot.0 += d.score;
            slot.1 += 1;
        }
        let mut m = ScoreMatrix::new();
        for ((system, eval_set), (sum, n)) in sums {
            m.insert(&system, eval_set, sum / n as f64)?;
        }
        for (&a, &c) in correctness {
            m.set_correctness(a, c)?;
        }
        m.per_dataset = per_dataset;
        Ok(m)
    }

    pub fn insert(&mut self, system: &str, eval_set: EvalSet, score: f64) -> Result<(), MetricError> {
        check_unit(score)?;
        self.scores.insert((system.to_string(), eval_set), score);
        Ok(())
    }

    pub fn set_correctness(&mut self, attack: AttackKind, c: f64) -> Result<(), MetricError> {
        check_unit(c)?;
        self.correctness.insert(attack, c);
        Ok(())
    }

    pub fn get(&self, system: &str, eval_set: EvalSet) -> Option<f64> {
        self.scores.get(&(system.to_string(), eval_set)).copied()
    }

    pub fn score(&self, system: &str, eval_set: EvalSet) -> Result<f64, MetricError> {
        self.get(system, eval_set).ok_or_else(|| MetricError::MissingEntry {
            system: system.to_string(),
            eval_set: eval_set.to_string(),
        })
    }

    pub fn correctness(&self, attack: AttackKind) -> Result<f64, MetricError> {
        self.correctness
            .get(&attack)
            .copied()
            .ok_or(MetricError::MissingCorrectness(attack))
    }

    pub fn correctness_map(&self) -> &BTreeMap<AttackKind, f64> {
        &self.correctness
    }

    pub fn per_dataset(&self) -> &[DatasetScore] {
        &self.per_dataset
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Systems in name order.
    pub fn systems(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.scores.keys().map(|(s, _)| s).collect();
        set.into_iter().cloned().collect()
    }

    /// Attacks with at least one score entry.
    pub fn attacks(&self) -> Vec<AttackKind> {
        let set: BTreeSet<AttackKind> = self.scores.keys().filter_map(|(_, e)| e.attack()).collect();
        set.into_iter().collect()
    }

    /// Every system with an attack entry also has a test entry.
    pub fn check(&self) -> Result<(), MetricError> {
        for system in self.systems() {
            self.score(&system, EvalSet::Test)?;
        }
        Ok(())
    }
}

/// `(1/|S|) Σ_s (1 − f(s, a))`
pub fn raw_potency(matrix: &ScoreMatrix, attack: AttackKind) -> Result<f64, MetricError> {
    let systems = matrix.systems();
    if systems.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut total = 0.0;
    for s in &systems {
        total += 1.0 - matrix.score(s, EvalSet::Attack(attack))?;
    }
    Ok(total / systems.len() as f64)
}

/// `c_a · raw_potency(a)`
pub fn potency(matrix: &ScoreMatrix, attack: AttackKind) -> Result<f64, MetricError> {
    Ok(matrix.correctness(attack)? * raw_potency(matrix, attack)?)
}

/// `Σ_a c_a·f(s, a) / Σ_a c_a` over every attack in the matrix.
pub fn resilience(matrix: &ScoreMatrix, system: &str) -> Result<f64, MetricError> {
    weighted_over_attacks(matrix, |a| matrix.score(system, EvalSet::Attack(a)))
}

/// How the relative resilience term is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelativeFormula {
    /// `1 − (f(s, t) − f(s, a))`
    #[default]
    Parenthesized,
    /// `1 − f(s, t) − f(s, a)`, as typeset; kept for auditing only.
    Literal,
}

/// Correctness-weighted relative resilience of `system` across all attacks.
pub fn resilience_rel(matrix: &ScoreMatrix, system: &str, formula: RelativeFormula) -> Result<f64, MetricError> {
    let test = matrix.score(system, EvalSet::Test)?;
    weighted_over_attacks(matrix, |a| {
        let attacked = matrix.score(system, EvalSet::Attack(a))?;
        Ok(match formula {
            RelativeFormula::Parenthesized => 1.0 - (test - attacked),
            RelativeFormula::Literal => 1.0 - test - attacked,
        })
    })
}

/// Relative resilience against a single attack, `1 − (f(s, t) − f(s, a))`.
/// The correctness weight cancels for one attack.
pub fn resilience_rel_attack(matrix: &ScoreMatrix, system: &str, attack: AttackKind) -> Result<f64, MetricError> {
    let test = matrix.score(system, EvalSet::Test)?;
    Ok(1.0 - (test - matrix.score(system, EvalSet::Attack(attack))?))
}

fn weighted_over_attacks(
    matrix: &ScoreMatrix,
    mut term: impl FnMut(AttackKind) -> Result<f64, MetricError>,
) -> Result<f64, MetricError> {
    let attacks = matrix.attacks();
    if attacks.is_empty() {
        return Err(MetricError::Empty);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for a in attacks {
        let c = matrix.correctness(a)?;
        num += c * term(a)?;
        den += c;
    }
    if den == 0.0 {
        return Err(MetricError::ZeroCorrectness);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub attack: AttackKind,
    pub raw_potency: f64,
    pub correctness: f64,
    pub potency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: String,
    pub test: f64,
    pub attacks: BTreeMap<AttackKind, f64>,
    pub resilience: f64,
    pub resilience_rel: f64,
    pub resilience_rel_per_attack: BTreeMap<AttackKind, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub attacks: Vec<AttackSummary>,
    pub systems: Vec<SystemSummary>,
}

/// Computes every robustness number for a complete matrix.
pub fn summarize(matrix: &ScoreMatrix) -> Result<RobustnessSummary, MetricError> {
    summarize_with(matrix, RelativeFormula::Parenthesized)
}

pub fn summarize_with(matrix: &ScoreMatrix, formula: RelativeFormula) -> Result<RobustnessSummary, MetricError> {
    if matrix.is_empty() {
        return Err(MetricError::Empty);
    }
    matrix.check()?;
    let mut attacks = Vec::new();
    for a in matrix.attacks() {
        attacks.push(AttackSummary {
            attack: a,
            raw_potency: raw_potency(matrix, a)?,
            correctness: matrix.correctness(a)?,
            potency: potency(matrix, a)?,
        });
    }
    let mut systems = Vec::new();
    for s in matrix.systems() {
        let mut scores = BTreeMap::new();
        let mut per_attack = BTreeMap::new();
        for a in matrix.attacks() {
            scores.insert(a, matrix.score(&s, EvalSet::Attack(a))?);
            per_attack.insert(a, resilience_rel_attack(matrix, &s, a)?);
        }
        systems.push(SystemSummary {
            test: matrix.score(&s, EvalSet::Test)?,
            attacks: scores,
            resilience: resilience(matrix, &s)?,
            resilience_rel: resilience_rel(matrix, &s, formula)?,
            resilience_rel_per_attack: per_attack,
            system: s,
        });
    }
    Ok(RobustnessSummary { attacks, systems })
}

#[cfg(test)]
mod tests {
    use super::*;
    use AttackKind::*;

    fn two_system_matrix() -> ScoreMatrix {
        let mut m = ScoreMatrix::new();
        for (s, t, sp, ng, pa) in [
            ("BERT_SDL", 0.6182, 0.5568, 0.5914, 0.6012),
            ("MT-DNN_MDL", 0.6695, 0.5767, 0.5871, 0.6380),
        ] {
            m.insert(s, EvalSet::Test, t).unwrap();
            m.insert(s, EvalSet::Attack(Spelling), sp).unwrap();
            m.insert(s, EvalSet::Attack(Negation), ng).unwrap();
            m.insert(s, EvalSet::Attack(Paraphrase), pa).unwrap();
        }
        m.set_correctness(Spelling, 0.584).unwrap();
        m.set_correctness(Negation, 1.0).unwrap();
        m.set_correctness(Paraphrase, 0.632).unwrap();
        m
    }

    #[test]
    fn potency_by_hand() {
        let m = two_system_matrix();
        // (0.4432 + 0.4233) / 2
        assert!((raw_potency(&m, Spelling).unwrap() - 0.43325).abs() < 1e-12);
        assert!((potency(&m, Spelling).unwrap() - 0.584 * 0.43325).abs() < 1e-12);
        assert_eq!(potency(&m, Negation).unwrap(), raw_potency(&m, Negation).unwrap());
    }

    #[test]
    fn perfect_systems_have_zero_potency() {
        let mut m = ScoreMatrix::new();
        m.insert("a", EvalSet::Test, 1.0).unwrap();
        m.insert("a", EvalSet::Attack(Negation), 1.0).unwrap();
        m.insert("b", EvalSet::Test, 1.0).unwrap();
        m.insert("b", EvalSet::Attack(Negation), 1.0).unwrap();
        assert_eq!(raw_potency(&m, Negation).unwrap(), 0.0);
    }

    #[test]
    fn single_attack_resilience_is_its_score() {
        let mut m = ScoreMatrix::new();
        m.insert("a", EvalSet::Test, 0.8).unwrap();
        m.insert("a", EvalSet::Attack(Spelling), 0.55).unwrap();
        m.set_correctness(Spelling, 1.0).unwrap();
        assert_eq!(resilience(&m, "a").unwrap(), 0.55);
    }

    #[test]
    fn zero_drop_gives_unit_relative_resilience() {
        let mut m = ScoreMatrix::new();
        m.insert("a", EvalSet::Test, 0.7).unwrap();
        for a in AttackKind::ALL {
            m.insert("a", EvalSet::Attack(a), 0.7).unwrap();
            m.set_correctness(a, 0.5).unwrap();
        }
        assert!((resilience_rel(&m, "a", RelativeFormula::Parenthesized).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn literal_reading_goes_negative() {
        let m = two_system_matrix();
        assert!(resilience_rel(&m, "BERT_SDL", RelativeFormula::Literal).unwrap() < 0.0);
        assert!(resilience_rel(&m, "BERT_SDL", RelativeFormula::Parenthesized).unwrap() > 0.9);
    }

    #[test]
    fn error_paths() {
        let mut m = ScoreMatrix::new();
        assert!(matches!(raw_potency(&m, Spelling), Err(MetricError::Empty)));
        m.insert("a", EvalSet::Test, 0.5).unwrap();
        assert!(matches!(
            raw_potency(&m, Spelling),
            Err(MetricError::MissingEntry { .. })
        ));
        m.insert("a", EvalSet::Attack(Spelling), 0.4).unwrap();
        assert!(matches!(
            potency(&m, Spelling),
            Err(MetricError::MissingCorrectness(Spelling))
        ));
        m.set_correctness(Spelling, 0.0).unwrap();
        assert!(matches!(resilience(&m, "a"), Err(MetricError::ZeroCorrectness)));
        assert!(matches!(
            m.insert("a", EvalSet::Test, 1.5),
            Err(MetricError::OutOfRange(_))
        ));
        assert!(m.set_correctness(Negation, -0.1).is_err());
    }

    #[test]
    fn check_requires_test_entry() {
        let mut m = ScoreMatrix::new();
        m.insert("a", EvalSet::Attack(Spelling), 0.4).unwrap();
        assert!(m.check().is_err());
        assert!(summarize(&m).is_err());
        assert!(matches!(summarize(&ScoreMatrix::new()), Err(MetricError::Empty)));
    }

    #[test]
    fn json_round_trip() {
        let m = two_system_matrix();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"eval_set\":\"spelling\""));
        let back: ScoreMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"scores":[{"system":"a","eval_set":"test","score":2.0}]}"#;
        assert!(serde_json::from_str::<ScoreMatrix>(bad).is_err());
    }

    #[test]
    fn from_per_dataset_means() {
        let rows = vec![
            DatasetScore {
                system: "a".into(),
                eval_set: EvalSet::Test,
                dataset: DatasetKey::Arc,
                score: 0.6,
                original: None,
            },
            DatasetScore {
                system: "a".into(),
                eval_set: EvalSet::Test,
                dataset: DatasetKey::Scd,
                score: 0.8,
                original: None,
            },
        ];
        let m = ScoreMatrix::from_per_dataset(rows, &BTreeMap::new()).unwrap();
        assert!((m.score("a", EvalSet::Test).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(m.per_dataset().len(), 2);
    }
}
