//! Monitoring-agent pipeline: telemetry and flow parsing, behavioral-schema
//! expansion, timestamp joins, attack-window labeling, class rebalancing and
//! non-IID shard partitioning.

mod flow;
mod manifest;
mod partition;
mod rebalance;
mod telemetry;

use std::path::{Path, PathBuf};

pub use flow::{parse_flow_csv, parse_flow_reader, records_to_samples, FlowParse, FlowRecord};
pub use manifest::{
    schema_hash, FlowSchema, MetricKey, MetricManifest, BEHAVIORAL_FEATURES, FLOW_FEATURES,
};
pub use partition::{partition_non_iid, Partition, ShardAssignment, ShardSpec, ShardWarning};
pub use rebalance::{rebalance, rebalance_indices, LabeledTable};
pub use telemetry::{
    expand_telemetry, label_windows, load_windows, parse_telemetry_csv, parse_telemetry_reader,
    timestamp_join, AttackWindow, BehavioralDataset, TelemetrySample,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("schema column `{0}` not present in header")]
    MissingColumn(String),
    #[error("line {line}: label `{value}` is not in the benign/malignant vocabulary")]
    BadLabel { line: u64, value: String },
    #[error("line {line}: column `{column}` value `{value}` is not numeric")]
    BadValue {
        line: u64,
        column: String,
        value: String,
    },
    #[error("metric `{metric}` (attribute `{attribute}`) is not in the manifest")]
    UnknownMetric { metric: String, attribute: String },
    #[error("samples mix entities `{0}` and `{1}`")]
    MixedEntities(String, String),
    #[error("no samples")]
    NoSamples,
    #[error("join needs at least one table")]
    EmptyInput,
    #[error("column `{0}` appears in more than one joined table")]
    DuplicateColumn(String),
    #[error("table for `{0}` is already labeled")]
    AlreadyLabeled(String),
    #[error("dataset is not labeled")]
    Unlabeled,
    #[error("attack window start {start} is after end {end}")]
    BadWindow { start: i64, end: i64 },
    #[error("benign ratio {ratio} cannot be reached by downsampling ({benign} benign, {malignant} malignant)")]
    Unachievable {
        ratio: f64,
        benign: usize,
        malignant: usize,
    },
    #[error("shard {shard}: file `{file}` has no valid rows")]
    ShardEmpty { shard: u32, file: String },
    #[error("invalid shard spec: {0}")]
    ShardSpec(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
