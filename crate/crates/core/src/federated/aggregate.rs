use super::{Aggregation, FedError};
use crate::neuralnet::FlatWeights;

/// Weighted mean of `values` by pairwise reduction of (weight, mean) pairs.
/// Equal inputs come back bit-identical.
fn tree_mean(terms: &[(f64, f64)]) -> (f64, f64) {
    match terms {
        [] => (0.0, 0.0),
        [t] => *t,
        _ => {
            let (l, r) = terms.split_at(terms.len() / 2);
            let (wl, ml) = tree_mean(l);
            let (wr, mr) = tree_mean(r);
            let w = wl + wr;
            if ml == mr {
                (w, ml)
            } else {
                (w, ml + (mr - ml) * (wr / w))
            }
        }
    }
}

/// Coordinate-wise FedAvg: the plain mean (uniform) or the mean weighted by
/// per-client sample counts.
pub fn aggregate(updates: &[FlatWeights], mode: Aggregation, counts: Option<&[u64]>) -> Result<FlatWeights, FedError> {
    let first = updates.first().ok_or(FedError::EmptyUpdates)?;
    for u in updates {
        if u.shape_tag != first.shape_tag || u.len() != first.len() {
            return Err(FedError::LengthMismatch {
                expected: first.len(),
                got: u.len(),
            });
        }
    }
    let weights: Vec<f64> = match (mode, counts) {
        (Aggregation::Uniform, None) => vec![1.0; updates.len()],
        (Aggregation::SampleWeighted, Some(c)) => {
            if c.len() != updates.len() {
                return Err(FedError::LengthMismatch {
                    expected: updates.len(),
                    got: c.len(),
                });
            }
            if c.iter().all(|&n| n == 0) {
                return Err(FedError::InvalidPlan("all sample counts are zero".into()));
            }
            c.iter().map(|&n| n as f64).collect()
        }
        (Aggregation::Uniform, Some(_)) => {
            return Err(FedError::InvalidPlan("uniform aggregation takes no counts".into()))
        }
        (Aggregation::SampleWeighted, None) => {
            return Err(FedError::InvalidPlan("sample-weighted aggregation needs counts".into()))
        }
    };
    let mut terms = Vec::with_capacity(updates.len());
    let values = (0..first.len())
        .map(|j| {
            terms.clear();
            terms.extend(updates.iter().zip(&weights).filter(|(_, &w)| w > 0.0).map(|(u, &w)| (w, u.values[j])));
            tree_mean(&terms).1
        })
        .collect();
    Ok(FlatWeights {
        shape_tag: first.shape_tag.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{MlpModel, INPUT};

    fn fw(values: Vec<f64>) -> FlatWeights {
        FlatWeights {
            shape_tag: "t".into(),
            values,
        }
    }

    #[test]
    fn uniform_pair() {
        let a = aggregate(&[fw(vec![0.0, 2.0]), fw(vec![2.0, 0.0])], Aggregation::Uniform, None).unwrap();
        assert_eq!(a.values, vec![1.0, 1.0]);
    }

    #[test]
    fn weighted_example() {
        let a = aggregate(&[fw(vec![0.0]), fw(vec![4.0])], Aggregation::SampleWeighted, Some(&[1, 3])).unwrap();
        assert_eq!(a.values, vec![3.0]);
    }

    #[test]
    fn identity_and_idempotence() {
        let w = FlatWeights::flatten(&MlpModel::init(INPUT, 3));
        assert_eq!(aggregate(std::slice::from_ref(&w), Aggregation::Uniform, None).unwrap(), w);
        for k in 2..=9 {
            let copies = vec![w.clone(); k];
            assert_eq!(aggregate(&copies, Aggregation::Uniform, None).unwrap(), w);
            let counts: Vec<u64> = (1..=k as u64).collect();
            assert_eq!(aggregate(&copies, Aggregation::SampleWeighted, Some(&counts)).unwrap(), w);
        }
    }

    #[test]
    fn matches_direct_mean() {
        let ws: Vec<FlatWeights> = (0..7).map(|s| FlatWeights::flatten(&MlpModel::init(5, s))).collect();
        let a = aggregate(&ws, Aggregation::Uniform, None).unwrap();
        for j in 0..a.len() {
            let direct = ws.iter().map(|w| w.values[j]).sum::<f64>() / 7.0;
            assert!((a.values[j] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(aggregate(&[], Aggregation::Uniform, None), Err(FedError::EmptyUpdates)));
        assert!(matches!(
            aggregate(&[fw(vec![1.0]), fw(vec![1.0, 2.0])], Aggregation::Uniform, None),
            Err(FedError::LengthMismatch { .. })
        ));
        assert!(aggregate(&[fw(vec![1.0])], Aggregation::SampleWeighted, None).is_err());
        assert!(aggregate(&[fw(vec![1.0])], Aggregation::SampleWeighted, Some(&[1, 2])).is_err());
    }
}
