use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BehavioralDataset, IngestError};
use crate::data::Samples;

/// Labeled rows after rebalancing. Row order is shuffled, so timestamps are
/// carried per row rather than as a sorted index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTable {
    pub columns: Vec<String>,
    pub timestamps: Vec<i64>,
    pub samples: Samples,
}

impl LabeledTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W, label_column: &str) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push(label_column.to_string());
        wr.write_record(&header)?;
        for (i, (row, label)) in self.samples.rows().enumerate() {
            let mut rec = vec![self.timestamps[i].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(label.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`LabeledTable::write_csv`]: a leading
    /// timestamp column and a trailing label column.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, IngestError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers().map_err(super::telemetry::csv_err)?.clone();
        if headers.len() < 3 {
            return Err(IngestError::Csv {
                line: 1,
                message: "expected timestamp, features and label columns".into(),
            });
        }
        let columns: Vec<String> = headers.iter().skip(1).take(headers.len() - 2).map(String::from).collect();
        let mut samples = Samples::new(columns.len());
        let mut timestamps = Vec::new();
        let mut row = vec![0.0; columns.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(super::telemetry::csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |column: &str, value: &str| IngestError::BadValue {
                line,
                column: column.to_string(),
                value: value.to_string(),
            };
            let ts = &rec[0];
            timestamps.push(ts.trim().parse::<i64>().map_err(|_| bad("timestamp", ts))?);
            for (j, slot) in row.iter_mut().enumerate() {
                let v = &rec[j + 1];
                *slot = v.trim().parse().map_err(|_| bad(&columns[j], v))?;
            }
            let l = &rec[headers.len() - 1];
            let label = match l.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(IngestError::BadLabel {
                        line,
                        value: other.to_string(),
                    })
                }
            };
            samples.push(&row, label);
        }
        Ok(LabeledTable {
            columns,
            timestamps,
            samples,
        })
    }
}

/// Chooses rows so that benign rows make up `benign_ratio` of the output,
/// downsampling one class uniformly without replacement. The returned indices
/// are shuffled; the same inputs and seed always give the same indices.
pub fn rebalance_indices(labels: &[u8], benign_ratio: f64, seed: u64) -> Result<Vec<usize>, IngestError> {
    let mut benign: Vec<usize> = Vec::new();
    let mut malignant: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == 1 {
            malignant.push(i);
        } else {
            benign.push(i);
        }
    }
    let (b, m) = (benign.len(), malignant.len());
    let unachievable = IngestError::Unachievable {
        ratio: benign_ratio,
        benign: b,
        malignant: m,
    };
    if !(benign_ratio > 0.0 && benign_ratio < 1.0) || b == 0 || m == 0 {
        return Err(unachievable);
    }

    // keep every malignant row and shrink benign, or the other way round
    let benign_target = (m as f64 * benign_ratio / (1.0 - benign_ratio)).round() as usize;
    let malignant_target = (b as f64 * (1.0 - benign_ratio) / benign_ratio).round() as usize;
    let (keep_b, keep_m) = if benign_target <= b && benign_target > 0 {
        (benign_target, m)
    } else if malignant_target <= m && malignant_target > 0 {
        (b, malignant_target)
    } else {
        return Err(unachievable);
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    benign.shuffle(&mut rng);
    malignant.shuffle(&mut rng);
    let mut chosen: Vec<usize> = benign[..keep_b].iter().chain(&malignant[..keep_m]).copied().collect();
    chosen.sort_unstable();
    chosen.shuffle(&mut rng);
    Ok(chosen)
}

pub fn rebalance(ds: &BehavioralDataset, benign_ratio: f64, seed: u64) -> Result<LabeledTable, IngestError> {
    let labels = ds.labels.as_ref().ok_or(IngestError::Unlabeled)?;
    let idx = rebalance_indices(labels, benign_ratio, seed)?;
    let mut samples = Samples::new(ds.width());
    let mut timestamps = Vec::with_capacity(idx.len());
    for i in idx {
        samples.push(ds.row(i), labels[i]);
        timestamps.push(ds.timestamps[i]);
    }
    Ok(LabeledTable {
        columns: ds.columns.clone(),
        timestamps,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(benign: usize, malignant: usize) -> Vec<u8> {
        let mut l = vec![0u8; benign];
        l.extend(vec![1u8; malignant]);
        l
    }

    fn counts(labels: &[u8], idx: &[usize]) -> (usize, usize) {
        let m = idx.iter().filter(|&&i| labels[i] == 1).count();
        (idx.len() - m, m)
    }

    #[test]
    fn already_at_ratio() {
        let l = labels(900, 100);
        let idx = rebalance_indices(&l, 0.9, 1).unwrap();
        assert_eq!(counts(&l, &idx), (900, 100));
    }

    #[test]
    fn shrinks_benign() {
        let l = labels(2000, 100);
        let idx = rebalance_indices(&l, 0.9, 1).unwrap();
        assert_eq!(counts(&l, &idx), (900, 100));
    }

    #[test]
    fn shrinks_malignant() {
        let l = labels(500, 500);
        let idx = rebalance_indices(&l, 0.9, 1).unwrap();
        // 500 * (1/9) = 55.6 -> 56
        assert_eq!(counts(&l, &idx), (500, 56));
        let exact_malignant: f64 = 500.0 / 0.9 - 500.0;
        assert!((56.0 - exact_malignant).abs() <= 1.0);
    }

    #[test]
    fn single_class_is_unachievable() {
        assert!(matches!(
            rebalance_indices(&labels(10, 0), 0.9, 1),
            Err(IngestError::Unachievable { .. })
        ));
    }

    #[test]
    fn deterministic_and_without_replacement() {
        let l = labels(300, 200);
        let a = rebalance_indices(&l, 0.9, 7).unwrap();
        let b = rebalance_indices(&l, 0.9, 7).unwrap();
        assert_eq!(a, b);
        let mut u = a.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), a.len());
        assert_ne!(a, rebalance_indices(&l, 0.9, 8).unwrap());
    }

    #[test]
    fn csv_roundtrip() {
        let t = LabeledTable {
            columns: vec!["a".into(), "b".into()],
            timestamps: vec![5, 3],
            samples: Samples::from_rows(2, &[vec![1.5, 2.0], vec![0.0, -1.0]], &[1, 0]),
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf, "label").unwrap();
        assert_eq!(LabeledTable::read_csv(buf.as_slice()).unwrap(), t);
    }
}
