//! Dense labeled sample matrices shared by the detectors.

use serde::{Deserialize, Serialize};

/// Row-major feature matrix with one binary label per row (0 = benign, 1 = malignant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl Samples {
    pub fn new(dim: usize) -> Self {
        Samples {
            dim,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Builds from a flat row-major buffer. Panics if the buffer is not `labels.len() * dim` long.
    pub fn from_flat(dim: usize, values: Vec<f64>, labels: Vec<u8>) -> Self {
        assert_eq!(values.len(), dim * labels.len(), "flat buffer does not match row count");
        Samples { dim, values, labels }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>], labels: &[u8]) -> Self {
        let mut s = Samples::new(dim);
        for (r, &l) in rows.iter().zip(labels) {
            s.push(r, l);
        }
        s
    }

    pub fn push(&mut self, row: &[f64], label: u8) {
        assert_eq!(row.len(), self.dim, "row width does not match matrix width");
        self.values.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], u8)> + '_ {
        self.values
            .chunks_exact(self.dim.max(1))
            .zip(self.labels.iter().copied())
    }

    /// New matrix holding the given rows, in the order given.
    pub fn select(&self, indices: &[usize]) -> Samples {
        let mut out = Samples {
            dim: self.dim,
            values: Vec::with_capacity(indices.len() * self.dim),
            labels: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.push(self.row(i), self.labels[i]);
        }
        out
    }

    /// Appends every row of `other`. Widths must agree.
    pub fn extend(&mut self, other: &Samples) {
        assert_eq!(self.dim, other.dim, "cannot concatenate matrices of different width");
        self.values.extend_from_slice(&other.values);
        self.labels.extend_from_slice(&other.labels);
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Per-feature z-score statistics. Constant features (zero spread) are flagged and map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of each column.
    pub fn fit(data: &Samples) -> Self {
        let d = data.dim();
        let n = data.len().max(1) as f64;
        let mut means = vec![0.0; d];
        for (row, _) in data.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for (row, _) in data.rows() {
            for ((acc, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *acc += (v - m) * (v - m);
            }
        }
        let stds = vars.into_iter().map(|v| (v / n).sqrt()).collect();
        Standardizer { means, stds }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.stds[j].is_nan() || self.stds[j] <= 0.0
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = if self.is_constant(j) {
                0.0
            } else {
                (row[j] - self.means[j]) / self.stds[j]
            };
        }
    }

    pub fn transform(&self, data: &Samples) -> Samples {
        let mut values = vec![0.0; data.values().len()];
        for (i, (row, _)) in data.rows().enumerate() {
            self.transform_row(row, &mut values[i * data.dim()..(i + 1) * data.dim()]);
        }
        Samples::from_flat(data.dim(), values, data.labels().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_and_extend() {
        let s = Samples::from_rows(2, &[vec![1.0, 2.0], vec![3.0, 4.0]], &[0, 1]);
        let t = s.select(&[1, 0]);
        assert_eq!(t.row(0), &[3.0, 4.0]);
        assert_eq!(t.labels(), &[1, 0]);
        let mut u = s.clone();
        u.extend(&t);
        assert_eq!(u.len(), 4);
        assert_eq!(u.positives(), 2);
    }

    #[test]
    fn standardizer_flags_constant_columns() {
        let s = Samples::from_rows(2, &[vec![1.0, 5.0], vec![3.0, 5.0]], &[0, 1]);
        let z = Standardizer::fit(&s);
        assert!(z.is_constant(1));
        let t = z.transform(&s);
        assert_eq!(t.row(0), &[-1.0, 0.0]);
        assert_eq!(t.row(1), &[1.0, 0.0]);
    }
}
