//! The ML-Agent / coordinator training loop: broadcast the global weights,
//! train locally on every shard, aggregate, measure divergence and accuracy.

mod aggregate;
mod client;
mod coordinator;
mod messages;
mod plan;
pub mod wire;

pub use aggregate::aggregate;
pub use client::{derive_seed, stratified_split, ClientAgent};
pub use coordinator::{
    build_agents, centralized_train, drive, initial_weights, run_experiment, run_round, AuditEntry, AuditLog,
    CentralConfig, CentralOutcome, ClientRoundStats, Experiment, InProcess, RoundReport, Transport,
};
pub use messages::{Message, Phase, UpdateMetrics};
pub use plan::{Aggregation, ClientConfig, FlPlan};
pub use wire::run_experiment_wire;

use crate::analytics::AnalyticsError;
use crate::neuralnet::NnError;

#[derive(Debug, thiserror::Error)]
pub enum FedError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("no shard with id {0}")]
    MissingShard(u32),
    #[error("client {client_id} failed: {message}")]
    ClientFailure { client_id: u32, message: String },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("no updates to aggregate")]
    EmptyUpdates,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("wire: {0}")]
    Wire(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}
