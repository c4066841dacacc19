//! Detection metrics over the positive class.

use serde::{Deserialize, Serialize};

use super::{ClassifierError, LabeledInstance, Scorer};

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    let denom = precision + recall;
    if denom > 0.0 {
        2.0 * precision * recall / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl DetectionMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    /// Metrics from parallel gold labels and predicted labels.
    pub fn from_predictions(gold: &[u8], predicted: &[bool]) -> Self {
        assert_eq!(gold.len(), predicted.len());
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (&g, &p) in gold.iter().zip(predicted) {
            match (g == 1, p) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        Self::from_counts(tp, fp, fn_, tn)
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    pub fn predicted_positive(&self) -> usize {
        self.true_positives + self.false_positives
    }
}

/// Scores every instance and thresholds at `threshold` (score ≥ τ is positive).
pub fn evaluate_detection(
    scorer: &mut dyn Scorer,
    instances: &[LabeledInstance],
    threshold: f64,
) -> Result<DetectionMetrics, ClassifierError> {
    let scores = score_instances(scorer, instances)?;
    metrics_at(instances, &scores, threshold)
}

pub fn score_instances(scorer: &mut dyn Scorer, instances: &[LabeledInstance]) -> Result<Vec<f64>, ClassifierError> {
    if instances.is_empty() {
        return Err(ClassifierError::EmptyInstances);
    }
    let texts: Vec<String> = instances.iter().map(|i| i.masked_text.clone()).collect();
    Ok(scorer.score_batch(&texts)?)
}

/// Metrics for precomputed scores.
pub fn metrics_at(
    instances: &[LabeledInstance],
    scores: &[f64],
    threshold: f64,
) -> Result<DetectionMetrics, ClassifierError> {
    if instances.is_empty() {
        return Err(ClassifierError::EmptyInstances);
    }
    let gold: Vec<u8> = instances.iter().map(|i| i.label).collect();
    let predicted: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    Ok(DetectionMetrics::from_predictions(&gold, &predicted))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_table_arithmetic() {
        assert!((f1_score(0.90, 0.87) - 0.88).abs() < 0.005);
        assert!((f1_score(0.83, 0.85) - 0.84).abs() < 0.005);
        assert!((f1_score(0.82, 0.58) - 0.68).abs() < 0.005);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn counts_to_rates() {
        // 783/870 = 0.90 precision, 783/900 = 0.87 recall
        let m = DetectionMetrics::from_counts(783, 87, 117, 1000);
        assert!((m.precision - 0.90).abs() < 1e-12);
        assert!((m.recall - 0.87).abs() < 1e-12);
        assert_eq!(m.total(), 1987);
        let empty = DetectionMetrics::from_counts(0, 0, 0, 5);
        assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
    }

    proptest::proptest! {
        #[test]
        fn f1_identity(tp in 0usize..500, fp in 0usize..500, fn_ in 0usize..500, tn in 0usize..500) {
            let m = DetectionMetrics::from_counts(tp, fp, fn_, tn);
            let expect = if m.precision + m.recall > 0.0 { 2.0 * m.precision * m.recall / (m.precision + m.recall) } else { 0.0 };
            proptest::prop_assert!((m.f1 - expect).abs() < 1e-9);
            proptest::prop_assert!((0.0..=1.0).contains(&m.f1));
        }
    }
}
