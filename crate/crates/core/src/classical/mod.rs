//! Intra-slice anomaly detectors: k-nearest neighbors, CART decision trees,
//! random forests, and stratified k-fold cross-validation over them.

mod cv;
mod forest;
mod knn;
mod tree;

pub use cv::{cross_validate, stratified_kfold, Algorithm, CvReport, FoldPlan, MetricSummary};
pub use forest::{rf_fit, ForestConfig, ForestModel};
pub use knn::{knn_fit, KnnModel};
pub use tree::{dt_fit, gini, TreeConfig, TreeModel, TreeNode};

use crate::analytics::AnalyticsError;

#[derive(Debug, thiserror::Error)]
pub enum ClassicalError {
    #[error("no training rows")]
    EmptyData,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("each class needs at least {k} rows for {k}-fold splitting (benign {benign}, malignant {malignant})")]
    TooFewSamples {
        k: usize,
        benign: usize,
        malignant: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// A fitted binary detector.
pub trait Classifier {
    fn n_features(&self) -> usize;

    /// Malignant score in [0, 1]; callers must pass `n_features()` values.
    fn score_unchecked(&self, x: &[f64]) -> f64;

    fn score(&self, x: &[f64]) -> Result<f64, ClassicalError> {
        if x.len() != self.n_features() {
            return Err(ClassicalError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    /// Label (1 iff score >= 0.5) and score.
    fn predict(&self, x: &[f64]) -> Result<(u8, f64), ClassicalError> {
        let s = self.score(x)?;
        Ok((u8::from(s >= 0.5), s))
    }
}
