//! The 78→16→16→2 feed-forward attack classifier, its optimizers and
//! mini-batch training loop.

mod flat;
mod mlp;
mod optim;
mod train;

pub use flat::FlatWeights;
pub use mlp::{param_count, Mode, MlpModel, DROPOUT_P, HIDDEN, INPUT, OUTPUT};
pub use optim::{OptimizerKind, OptimizerState};
pub use train::{accuracy, train, EarlyStop, EpochStats, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite input in batch row {row}")]
    NonFiniteInput { row: usize },
    #[error("weight vector has {got} values, layout {tag} needs {expected}")]
    LengthMismatch { tag: String, expected: usize, got: usize },
    #[error("label {0} is not binary")]
    BadLabel(u8),
    #[error("no training rows")]
    EmptyData,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("weights encoding: {0}")]
    Format(String),
}
