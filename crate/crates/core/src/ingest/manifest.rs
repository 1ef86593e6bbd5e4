use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IngestError;

/// Number of telemetry columns per entity in the default behavioral schema.
pub const BEHAVIORAL_FEATURES: usize = 42;
/// Number of numeric features in a flow record.
pub const FLOW_FEATURES: usize = 78;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricKey {
    pub metric: String,
    #[serde(default)]
    pub attribute: String,
}

impl MetricKey {
    pub fn new(metric: &str, attribute: &str) -> Self {
        MetricKey {
            metric: metric.to_string(),
            attribute: attribute.to_string(),
        }
    }

    /// `metric` for scalar metrics, `metric.attribute` otherwise.
    pub fn column_name(&self) -> String {
        if self.attribute.is_empty() {
            self.metric.clone()
        } else {
            format!("{}.{}", self.metric, self.attribute)
        }
    }
}

/// Ordered (metric, attribute) pairs defining the wide behavioral schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricManifest {
    pub entries: Vec<MetricKey>,
    pub label_column: String,
}

// cgroup chart dimensions as exported by the monitoring agent, 22 metrics expanded to 42 columns.
const DEFAULT_ENTRIES: [(&str, &str); BEHAVIORAL_FEATURES] = [
    ("cpu", "user"),
    ("cpu", "system"),
    ("cpu_limit", ""),
    ("throttled", ""),
    ("throttled_duration", ""),
    ("mem", "cache"),
    ("mem", "rss"),
    ("mem", "rss_huge"),
    ("mem", "mapped_file"),
    ("mem", "swap"),
    ("writeback", "dirty"),
    ("writeback", "writeback"),
    ("mem_activity", "in"),
    ("mem_activity", "out"),
    ("pgfaults", "minor"),
    ("pgfaults", "major"),
    ("mem_usage", "ram"),
    ("mem_usage", "swap"),
    ("mem_usage_limit", "available"),
    ("mem_usage_limit", "used"),
    ("mem_utilization", ""),
    ("mem_failcnt", ""),
    ("net_eth0", "received"),
    ("net_eth0", "sent"),
    ("net_carrier_eth0", ""),
    ("net_packets_eth0", "received"),
    ("net_packets_eth0", "sent"),
    ("net_packets_eth0", "multicast"),
    ("net_errors_eth0", "inbound"),
    ("net_errors_eth0", "outbound"),
    ("net_drops_eth0", "inbound"),
    ("net_drops_eth0", "outbound"),
    ("net_fifo_eth0", "receive"),
    ("net_fifo_eth0", "transmit"),
    ("net_events_eth0", "frames"),
    ("net_events_eth0", "collisions"),
    ("net_events_eth0", "carrier"),
    ("throttle_io", "read"),
    ("throttle_io", "write"),
    ("throttle_serviced_ops", "read"),
    ("throttle_serviced_ops", "write"),
    ("pids_current", ""),
];

impl Default for MetricManifest {
    fn default() -> Self {
        MetricManifest {
            entries: DEFAULT_ENTRIES
                .iter()
                .map(|(m, a)| MetricKey::new(m, a))
                .collect(),
            label_column: "label".to_string(),
        }
    }
}

impl MetricManifest {
    pub fn new(entries: Vec<MetricKey>, label_column: &str) -> Result<Self, IngestError> {
        let m = MetricManifest {
            entries,
            label_column: label_column.to_string(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.entries.is_empty() {
            return Err(IngestError::Manifest("manifest has no entries".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e) {
                return Err(IngestError::Manifest(format!(
                    "duplicate manifest entry {}",
                    e.column_name()
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let m: MetricManifest = serde_json::from_str(&text)
            .map_err(|e| IngestError::Manifest(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.entries.iter().map(MetricKey::column_name).collect()
    }

    pub fn contains_metric(&self, metric: &str) -> bool {
        self.entries.iter().any(|e| e.metric == metric)
    }
}

/// Maps flow-CSV header columns onto the 78 feature slots and the label column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSchema {
    pub features: Vec<String>,
    pub label: String,
}

// Column names of the public intrusion-detection flow exports. The second
// "Fwd Header Length" column is disambiguated with a ".1" suffix.
const DEFAULT_FLOW_COLUMNS: [&str; FLOW_FEATURES] = [
    "Destination Port",
    "Flow Duration",
    "Total Fwd Packets",
    "Total Backward Packets",
    "Total Length of Fwd Packets",
    "Total Length of Bwd Packets",
    "Fwd Packet Length Max",
    "Fwd Packet Length Min",
    "Fwd Packet Length Mean",
    "Fwd Packet Length Std",
    "Bwd Packet Length Max",
    "Bwd Packet Length Min",
    "Bwd Packet Length Mean",
    "Bwd Packet Length Std",
    "Flow Bytes/s",
    "Flow Packets/s",
    "Flow IAT Mean",
    "Flow IAT Std",
    "Flow IAT Max",
    "Flow IAT Min",
    "Fwd IAT Total",
    "Fwd IAT Mean",
    "Fwd IAT Std",
    "Fwd IAT Max",
    "Fwd IAT Min",
    "Bwd IAT Total",
    "Bwd IAT Mean",
    "Bwd IAT Std",
    "Bwd IAT Max",
    "Bwd IAT Min",
    "Fwd PSH Flags",
    "Bwd PSH Flags",
    "Fwd URG Flags",
    "Bwd URG Flags",
    "Fwd Header Length",
    "Bwd Header Length",
    "Fwd Packets/s",
    "Bwd Packets/s",
    "Min Packet Length",
    "Max Packet Length",
    "Packet Length Mean",
    "Packet Length Std",
    "Packet Length Variance",
    "FIN Flag Count",
    "SYN Flag Count",
    "RST Flag Count",
    "PSH Flag Count",
    "ACK Flag Count",
    "URG Flag Count",
    "CWE Flag Count",
    "ECE Flag Count",
    "Down/Up Ratio",
    "Average Packet Size",
    "Avg Fwd Segment Size",
    "Avg Bwd Segment Size",
    "Fwd Header Length.1",
    "Fwd Avg Bytes/Bulk",
    "Fwd Avg Packets/Bulk",
    "Fwd Avg Bulk Rate",
    "Bwd Avg Bytes/Bulk",
    "Bwd Avg Packets/Bulk",
    "Bwd Avg Bulk Rate",
    "Subflow Fwd Packets",
    "Subflow Fwd Bytes",
    "Subflow Bwd Packets",
    "Subflow Bwd Bytes",
    "Init_Win_bytes_forward",
    "Init_Win_bytes_backward",
    "act_data_pkt_fwd",
    "min_seg_size_forward",
    "Active Mean",
    "Active Std",
    "Active Max",
    "Active Min",
    "Idle Mean",
    "Idle Std",
    "Idle Max",
    "Idle Min",
];

impl Default for FlowSchema {
    fn default() -> Self {
        FlowSchema {
            features: DEFAULT_FLOW_COLUMNS.iter().map(|s| s.to_string()).collect(),
            label: "Label".to_string(),
        }
    }
}

impl FlowSchema {
    pub fn new(features: Vec<String>, label: &str) -> Result<Self, IngestError> {
        let s = FlowSchema {
            features,
            label: label.to_string(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.features.len() != FLOW_FEATURES {
            return Err(IngestError::Manifest(format!(
                "flow schema lists {} features, expected {FLOW_FEATURES}",
                self.features.len()
            )));
        }
        let unique: HashSet<_> = self.features.iter().collect();
        if unique.len() != self.features.len() {
            return Err(IngestError::Manifest("flow schema repeats a column".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let s: FlowSchema = serde_json::from_str(&text)
            .map_err(|e| IngestError::Manifest(format!("{}: {e}", path.display())))?;
        s.validate()?;
        Ok(s)
    }

    /// Hex SHA-256 over the canonical JSON of the feature list; models are bound to it.
    pub fn schema_hash(&self) -> String {
        schema_hash(&self.features)
    }
}

/// Digest identifying an ordered feature-column list.
pub fn schema_hash(columns: &[String]) -> String {
    let json = serde_json::to_vec(columns).expect("string list serializes");
    hex::encode(Sha256::digest(&json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_has_42_unique_columns() {
        let m = MetricManifest::default();
        assert_eq!(m.len(), BEHAVIORAL_FEATURES);
        m.validate().unwrap();
        let names: HashSet<_> = m.column_names().into_iter().collect();
        assert_eq!(names.len(), 42);
        assert!(names.contains("net_packets_eth0.multicast"));
    }

    #[test]
    fn default_manifest_covers_all_22_metrics() {
        let m = MetricManifest::default();
        let metrics: HashSet<_> = m.entries.iter().map(|e| e.metric.as_str()).collect();
        assert_eq!(metrics.len(), 22);
    }

    #[test]
    fn duplicate_entry_rejected() {
        let e = vec![MetricKey::new("cpu", ""), MetricKey::new("cpu", "")];
        assert!(MetricManifest::new(e, "label").is_err());
    }

    #[test]
    fn default_flow_schema_is_valid() {
        let s = FlowSchema::default();
        s.validate().unwrap();
        assert_eq!(s.schema_hash().len(), 64);
    }

    #[test]
    fn flow_schema_length_enforced() {
        assert!(FlowSchema::new(vec!["a".into()], "Label").is_err());
    }
}
