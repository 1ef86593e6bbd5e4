//! Federated intrusion and anomaly detection for network-slice workloads.
//!
//! The crate covers the full agent pipeline: [`ingest`] turns telemetry and
//! flow exports into labeled matrices, [`classical`] and [`neuralnet`] hold the
//! detectors, [`federated`] runs the client/coordinator training loop,
//! [`analytics`] computes every evaluation statistic and [`service`] serves
//! predictions from a versioned model pool. [`cli`] wires them into the
//! `slicefed` binary.

pub mod analytics;
pub mod artifact;
pub mod classical;
pub mod cli;
pub mod data;
pub mod federated;
pub mod ingest;
pub mod neuralnet;
pub mod service;
pub mod synth;

pub use data::{Samples, Standardizer};
