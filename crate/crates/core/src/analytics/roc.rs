use serde::{Deserialize, Serialize};

use super::AnalyticsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve swept over distinct scores in descending order, with tied
/// scores forming a single step. The trapezoidal area equals the
/// Mann-Whitney probability that a positive outranks a negative (ties ½).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve, AnalyticsError> {
    if scores.len() != labels.len() {
        return Err(AnalyticsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(AnalyticsError::Invalid("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(AnalyticsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    // twice the area in units of (1/P)(1/N), kept integral so ties stay exact
    let mut area2: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    let auc = area2 as f64 / (2.0 * positives as f64 * negatives as f64);
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let r = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn identical_scores_give_diagonal() {
        let r = roc_auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn hand_pairs() {
        // pairs (0.9 vs 0.8) win, (0.3 vs 0.8) loss -> 1/2
        let r = roc_auc(&[0.9, 0.8, 0.3], &[1, 0, 1]).unwrap();
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[1, 1]).unwrap_err(), AnalyticsError::SingleClass);
    }
}
