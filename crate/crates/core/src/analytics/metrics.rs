use serde::{Deserialize, Serialize};

use super::AnalyticsError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn metrics(self) -> EvalMetrics {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (accuracy, _) = ratio(self.tp + self.tn, self.total());
        let (precision, precision_undefined) = ratio(self.tp, self.tp + self.fp);
        let (recall, recall_undefined) = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EvalMetrics {
            accuracy,
            precision,
            recall,
            f1,
            precision_undefined,
            recall_undefined,
            counts: self,
        }
    }
}

/// Accuracy, precision, recall and F1. Ratios with a zero denominator are 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default)]
    pub precision_undefined: bool,
    #[serde(default)]
    pub recall_undefined: bool,
    pub counts: ConfusionCounts,
}

pub fn confusion_metrics(predictions: &[u8], labels: &[u8]) -> Result<EvalMetrics, AnalyticsError> {
    if predictions.len() != labels.len() {
        return Err(AnalyticsError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p == 1, l == 1) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c.metrics())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 5)).collect();
        let m = confusion_metrics(&labels, &labels).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.counts.total(), 100);
    }

    #[test]
    fn hand_counts() {
        // TP=2, FP=1, FN=1, TN=0
        let m = confusion_metrics(&[1, 1, 1, 0], &[1, 1, 0, 1]).unwrap();
        assert_eq!(m.counts, ConfusionCounts { tp: 2, tn: 0, fp: 1, fn_: 1 });
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_benign_flags_undefined_precision() {
        let m = confusion_metrics(&[0, 0, 0], &[0, 0, 0]).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(m.precision_undefined);
        assert!(m.recall_undefined);
        assert_eq!(m.precision, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            confusion_metrics(&[1], &[1, 0]).unwrap_err(),
            AnalyticsError::LengthMismatch(1, 2)
        );
    }
}
