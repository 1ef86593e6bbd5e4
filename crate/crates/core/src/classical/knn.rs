use serde::{Deserialize, Serialize};

use super::{ClassicalError, Classifier};
use crate::data::{Samples, Standardizer};

/// Stored training set with the z-score statistics it was standardized with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub standardization: Standardizer,
    /// Standardized training rows.
    pub training: Samples,
}

pub fn knn_fit(data: &Samples, k: usize) -> Result<KnnModel, ClassicalError> {
    if data.is_empty() {
        return Err(ClassicalError::EmptyData);
    }
    if k == 0 || k > data.len() {
        return Err(ClassicalError::InvalidConfig(format!(
            "k = {k} with {} training rows",
            data.len()
        )));
    }
    let standardization = Standardizer::fit(data);
    Ok(KnnModel {
        k,
        training: standardization.transform(data),
        standardization,
    })
}

impl KnnModel {
    /// Indices of the `k` nearest training rows, nearest first. Equal
    /// distances rank the lower row index first.
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let d = self.training.dim();
        let mut q = vec![0.0; d];
        self.standardization.transform_row(x, &mut q);
        let active: Vec<usize> = (0..d).filter(|&j| !self.standardization.is_constant(j)).collect();
        let mut dist: Vec<(f64, usize)> = self
            .training
            .rows()
            .enumerate()
            .map(|(i, (row, _))| {
                let s: f64 = active.iter().map(|&j| (row[j] - q[j]).powi(2)).sum();
                (s, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

impl Classifier for KnnModel {
    fn n_features(&self) -> usize {
        self.training.dim()
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let hits = self
            .neighbors(x)
            .into_iter()
            .filter(|&i| self.training.label(i) == 1)
            .count();
        hits as f64 / self.k as f64
    }
}
