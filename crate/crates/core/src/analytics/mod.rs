//! Evaluation statistics: confusion metrics, ROC/AUC, two-component PCA,
//! cosine divergence between weight vectors, one-way ANOVA and descriptive
//! summaries, plus CSV/SVG report emission.

mod anova;
mod describe;
mod divergence;
mod metrics;
mod pca;
pub mod report;
mod roc;
pub mod special;

pub use anova::{anova_oneway, f_survival, AnovaResult};
pub use describe::{describe, Description};
pub use divergence::cosine_divergence;
pub use metrics::{confusion_metrics, ConfusionCounts, EvalMetrics};
pub use pca::{pca2, Pca2Projection};
pub use roc::{roc_auc, RocCurve};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("fewer than two non-constant columns")]
    DegenerateData,
    #[error("within-group variance is zero; F is undefined")]
    DegenerateVariance,
    #[error("invalid input: {0}")]
    Invalid(String),
}
