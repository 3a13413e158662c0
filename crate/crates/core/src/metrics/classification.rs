//! Per-dataset classification scores.
//!
//! Every class of the scheme takes part in the macro average, including classes
//! that appear in neither gold nor predictions. Those contribute an F1 of 0.

use crate::records::{LabelScheme, OriginalMetric};

use super::MetricError;

/// Square confusion matrix indexed `[gold][pred]` in scheme class order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_labels<G, P>(gold: &[G], pred: &[P], scheme: &LabelScheme) -> Result<Self, MetricError>
    where
        G: AsRef<str>,
        P: AsRef<str>,
    {
        if gold.len() != pred.len() {
            return Err(MetricError::LengthMismatch {
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        if gold.is_empty() {
            return Err(MetricError::Empty);
        }
        let k = scheme.classes.len();
        let mut counts = vec![vec![0; k]; k];
        for (g, p) in gold.iter().zip(pred) {
            let gi = class_of(scheme, g.as_ref())?;
            let pi = class_of(scheme, p.as_ref())?;
            counts[gi][pi] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, class: usize) -> usize {
        self.counts[class][class]
    }

    pub fn false_positives(&self, class: usize) -> usize {
        (0..self.n_classes())
            .filter(|&g| g != class)
            .map(|g| self.counts[g][class])
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> usize {
        (0..self.n_classes())
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum()
    }

    /// `2·TP / (2·TP + FP + FN)`, 0 when the class never occurs.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.true_positives(class);
        let denom = 2 * tp + self.false_positives(class) + self.false_negatives(class);
        if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        }
    }

    pub fn correct(&self) -> usize {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }
}

fn class_of(scheme: &LabelScheme, label: &str) -> Result<usize, MetricError> {
    scheme
        .class_index(label)
        .ok_or_else(|| MetricError::UnknownLabel(label.to_string()))
}

/// Unweighted mean of per-class F1 over all scheme classes.
pub fn f1_macro<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    scheme: &LabelScheme,
) -> Result<f64, MetricError> {
    let cm = ConfusionMatrix::from_labels(gold, pred, scheme)?;
    let k = cm.n_classes();
    Ok((0..k).map(|c| cm.f1(c)).sum::<f64>() / k as f64)
}

/// Macro F1 over the scheme classes minus `excluded`.
pub fn f1_macro_excluding<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    scheme: &LabelScheme,
    excluded: &str,
) -> Result<f64, MetricError> {
    let skip = scheme
        .class_index(excluded)
        .ok_or_else(|| MetricError::ExcludedNotInScheme(excluded.to_string()))?;
    let cm = ConfusionMatrix::from_labels(gold, pred, scheme)?;
    let kept: Vec<usize> = (0..cm.n_classes()).filter(|&c| c != skip).collect();
    if kept.is_empty() {
        return Err(MetricError::ExcludedNotInScheme(excluded.to_string()));
    }
    Ok(kept.iter().map(|&c| cm.f1(c)).sum::<f64>() / kept.len() as f64)
}

/// Micro-averaged F1 from pooled TP/FP/FN counts.
pub fn f1_micro<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    scheme: &LabelScheme,
) -> Result<f64, MetricError> {
    let cm = ConfusionMatrix::from_labels(gold, pred, scheme)?;
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for c in 0..cm.n_classes() {
        tp += cm.true_positives(c);
        fp += cm.false_positives(c);
        fneg += cm.false_negatives(c);
    }
    Ok((2 * tp) as f64 / (2 * tp + fp + fneg) as f64)
}

pub fn accuracy<G: AsRef<str>, P: AsRef<str>>(gold: &[G], pred: &[P]) -> Result<f64, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g.as_ref() == p.as_ref()).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Fake News Challenge score relative to the best achievable score.
///
/// Per sample: 0.25 when the related/unrelated decision is right, plus 0.75
/// when a related gold label is predicted exactly.
pub fn fnc1_score<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    scheme: &LabelScheme,
) -> Result<f64, MetricError> {
    let related = scheme.related_group.as_ref().ok_or(MetricError::NoRelatedGroup)?;
    // validates lengths and labels
    ConfusionMatrix::from_labels(gold, pred, scheme)?;
    let is_related = |l: &str| related.iter().any(|r| r == l);
    let (mut achieved, mut best) = (0.0, 0.0);
    for (g, p) in gold.iter().zip(pred) {
        let (g, p) = (g.as_ref(), p.as_ref());
        let g_rel = is_related(g);
        best += if g_rel { 1.0 } else { 0.25 };
        if g_rel == is_related(p) {
            achieved += 0.25;
        }
        if g_rel && g == p {
            achieved += 0.75;
        }
    }
    Ok(achieved / best)
}

/// Score under the metric the dataset was originally evaluated with.
pub fn original_metric<G: AsRef<str>, P: AsRef<str>>(
    gold: &[G],
    pred: &[P],
    scheme: &LabelScheme,
) -> Result<f64, MetricError> {
    match scheme.original_metric {
        OriginalMetric::F1Macro => f1_macro(gold, pred, scheme),
        OriginalMetric::F1Micro => f1_micro(gold, pred, scheme),
        OriginalMetric::Accuracy => {
            ConfusionMatrix::from_labels(gold, pred, scheme)?;
            accuracy(gold, pred)
        }
        OriginalMetric::Fnc1 => fnc1_score(gold, pred, scheme),
        OriginalMetric::F1MacroExcluding => {
            let excluded = scheme
                .excluded_for_original_metric
                .as_deref()
                .ok_or_else(|| MetricError::ExcludedNotInScheme(String::new()))?;
            f1_macro_excluding(gold, pred, scheme, excluded)
        }
    }
}

/// Arithmetic mean of per-seed scores.
pub fn aggregate_seeds(per_seed: &[f64]) -> Result<f64, MetricError> {
    if per_seed.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(per_seed.iter().sum::<f64>() / per_seed.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{builtin_scheme, DatasetKey};

    fn binary() -> LabelScheme {
        builtin_scheme(DatasetKey::Ibmcs)
    }

    #[test]
    fn perfect_predictions() {
        let s = builtin_scheme(DatasetKey::Semeval2019t7);
        let g = ["comment", "support", "query", "deny", "comment"];
        assert_eq!(f1_macro(&g, &g, &s).unwrap(), 1.0);
        assert_eq!(f1_micro(&g, &g, &s).unwrap(), 1.0);
        assert_eq!(accuracy(&g, &g).unwrap(), 1.0);
    }

    #[test]
    fn hand_confusion_binary() {
        // gold [A,A,B,B] pred [A,B,A,B]: each class TP=1 FP=1 FN=1 -> F1 = 2/4
        let g = ["pro", "pro", "con", "con"];
        let p = ["pro", "con", "pro", "con"];
        let cm = ConfusionMatrix::from_labels(&g, &p, &binary()).unwrap();
        assert_eq!(cm.f1(0), 0.5);
        assert_eq!(cm.f1(1), 0.5);
        assert_eq!(f1_macro(&g, &p, &binary()).unwrap(), 0.5);
    }

    #[test]
    fn absent_class_counts_as_zero() {
        // semeval2016t6 has three classes; only two occur here
        let s = builtin_scheme(DatasetKey::Semeval2016t6);
        let g = ["against", "favor"];
        assert!((f1_macro(&g, &g, &s).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_macro_excluding(&g, &g, &s, "none").unwrap(), 1.0);
    }

    #[test]
    fn excluding_averages_over_remaining_classes() {
        let s = builtin_scheme(DatasetKey::Semeval2016t6);
        let g = ["against", "against", "favor", "none"];
        let p = ["against", "favor", "favor", "against"];
        // against: TP1 FP1 FN1 -> .5 ; favor: TP1 FP1 FN0 -> 2/3
        let v = f1_macro_excluding(&g, &p, &s, "none").unwrap();
        assert!((v - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!(matches!(
            f1_macro_excluding(&g, &p, &s, "neutral"),
            Err(MetricError::ExcludedNotInScheme(_))
        ));
    }

    #[test]
    fn all_wrong_is_zero() {
        let g = ["pro", "pro", "con"];
        let p = ["con", "con", "pro"];
        assert_eq!(f1_macro(&g, &p, &binary()).unwrap(), 0.0);
        assert_eq!(f1_micro(&g, &p, &binary()).unwrap(), 0.0);
        assert_eq!(accuracy(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn micro_equals_accuracy() {
        let s = builtin_scheme(DatasetKey::Iac1);
        let g = ["pro", "anti", "other", "pro", "pro", "anti"];
        let p = ["pro", "pro", "other", "anti", "pro", "other"];
        assert_eq!(f1_micro(&g, &p, &s).unwrap(), accuracy(&g, &p).unwrap());
    }

    #[test]
    fn errors() {
        let s = binary();
        assert!(matches!(
            f1_macro(&["pro"], &["pro", "con"], &s),
            Err(MetricError::LengthMismatch { .. })
        ));
        assert!(matches!(f1_macro::<&str, &str>(&[], &[], &s), Err(MetricError::Empty)));
        assert!(matches!(
            f1_macro(&["pro"], &["maybe"], &s),
            Err(MetricError::UnknownLabel(_))
        ));
        assert!(matches!(
            fnc1_score(&["pro"], &["pro"], &s),
            Err(MetricError::NoRelatedGroup)
        ));
        assert!(matches!(aggregate_seeds(&[]), Err(MetricError::Empty)));
    }

    #[test]
    fn fnc1_award_rule() {
        let s = builtin_scheme(DatasetKey::Fnc1);
        assert_eq!(
            fnc1_score(&["discuss", "unrelated"], &["discuss", "unrelated"], &s).unwrap(),
            1.0
        );
        // related gold, wrong related label: 0.25 of 1.00
        assert_eq!(fnc1_score(&["discuss"], &["agree"], &s).unwrap(), 0.25);
        // unrelated gold predicted related: 0 of 0.25
        assert_eq!(fnc1_score(&["unrelated"], &["agree"], &s).unwrap(), 0.0);
        // both together: 0.25 / 1.25
        assert_eq!(
            fnc1_score(&["discuss", "unrelated"], &["agree", "agree"], &s).unwrap(),
            0.2
        );
    }

    #[test]
    fn original_metric_dispatch() {
        let s = builtin_scheme(DatasetKey::Ibmcs);
        let g = ["pro", "pro", "con", "con"];
        let p = ["pro", "pro", "pro", "con"];
        assert_eq!(original_metric(&g, &p, &s).unwrap(), 0.75);
        let fnc = builtin_scheme(DatasetKey::Fnc1);
        assert_eq!(original_metric(&["discuss"], &["agree"], &fnc).unwrap(), 0.25);
    }

    #[test]
    fn seed_means() {
        assert!((aggregate_seeds(&[0.6; 5]).unwrap() - 0.6).abs() < 1e-15);
        assert!((aggregate_seeds(&[0.5, 0.7]).unwrap() - 0.6).abs() < 1e-15);
        let fnc_seeds = [0.7401, 0.7523, 0.7468, 0.7439, 0.7499];
        assert!((aggregate_seeds(&fnc_seeds).unwrap() - 0.7466).abs() < 1e-12);
    }
}
