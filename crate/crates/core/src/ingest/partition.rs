use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_flow_csv, FlowParse, FlowRecord, FlowSchema, IngestError};

/// Validation tolerance, in percentage points, for expected shard statistics.
const TOLERANCE_PP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardAssignment {
    pub id: u32,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_malignant_pct: Option<f64>,
}

/// Which source file feeds which agent shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardSpec {
    pub shards: Vec<ShardAssignment>,
}

impl ShardSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.shards.is_empty() {
            return Err(IngestError::ShardSpec("no shards".into()));
        }
        let ids: HashSet<u32> = self.shards.iter().map(|s| s.id).collect();
        let k = ids.len() as u32;
        if (1..=k).any(|i| !ids.contains(&i)) {
            return Err(IngestError::ShardSpec(format!(
                "shard ids must be contiguous from 1, got {ids:?}"
            )));
        }
        let mut files = HashSet::new();
        for s in &self.shards {
            if !files.insert(s.file.as_str()) {
                return Err(IngestError::ShardSpec(format!(
                    "file `{}` assigned more than once",
                    s.file
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let spec: ShardSpec = serde_json::from_str(&text)
            .map_err(|e| IngestError::ShardSpec(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn shard_count(&self) -> usize {
        self.shards.iter().map(|s| s.id).collect::<HashSet<_>>().len()
    }
}

/// A source file whose parsed statistics disagree with its declared metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardWarning {
    pub shard: u32,
    pub file: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Partition {
    pub shards: BTreeMap<u32, Vec<FlowRecord>>,
    pub skipped: usize,
    pub warnings: Vec<ShardWarning>,
}

fn check(assignment: &ShardAssignment, parsed: &FlowParse) -> Vec<ShardWarning> {
    let mut out = Vec::new();
    let warn = |message: String| ShardWarning {
        shard: assignment.id,
        file: assignment.file.clone(),
        message,
    };
    let rows = parsed.records.len() + parsed.skipped;
    if let Some(expected) = assignment.expected_rows {
        let deviation_pp = 100.0 * (rows as f64 - expected as f64).abs() / expected.max(1) as f64;
        if deviation_pp > TOLERANCE_PP {
            out.push(warn(format!("expected {expected} rows, found {rows}")));
        }
    }
    if let Some(expected) = assignment.expected_malignant_pct {
        let actual = parsed.malignant_pct();
        if (actual - expected).abs() > TOLERANCE_PP {
            out.push(warn(format!(
                "expected {expected:.2}% malignant, found {actual:.2}%"
            )));
        }
    }
    out
}

/// Parses every assigned file (in parallel) and groups the records by shard.
/// Relative file paths resolve against `base_dir`.
pub fn partition_non_iid(
    spec: &ShardSpec,
    schema: &FlowSchema,
    base_dir: &Path,
) -> Result<Partition, IngestError> {
    spec.validate()?;
    let parsed: Vec<Result<FlowParse, IngestError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .shards
            .iter()
            .map(|a| scope.spawn(move || parse_flow_csv(&base_dir.join(&a.file), schema)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("flow parser thread panicked"))
            .collect()
    });

    let mut out = Partition::default();
    for (assignment, parsed) in spec.shards.iter().zip(parsed) {
        let parsed = parsed?;
        if parsed.records.is_empty() {
            return Err(IngestError::ShardEmpty {
                shard: assignment.id,
                file: assignment.file.clone(),
            });
        }
        for w in check(assignment, &parsed) {
            log::warn!("shard {} ({}): {}", w.shard, w.file, w.message);
            out.warnings.push(w);
        }
        out.skipped += parsed.skipped;
        out.shards.entry(assignment.id).or_default().extend(parsed.records);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguity_and_uniqueness() {
        let a = |id, f: &str| ShardAssignment {
            id,
            file: f.into(),
            expected_rows: None,
            expected_malignant_pct: None,
        };
        assert!(ShardSpec { shards: vec![a(1, "x"), a(3, "y")] }.validate().is_err());
        assert!(ShardSpec { shards: vec![a(1, "x"), a(2, "x")] }.validate().is_err());
        let ok = ShardSpec { shards: vec![a(1, "x"), a(2, "y"), a(2, "z")] };
        ok.validate().unwrap();
        assert_eq!(ok.shard_count(), 2);
    }

    #[test]
    fn table4_metadata_check() {
        // 692,703 rows with 36.48% malignant (Wednesday shard)
        let a = ShardAssignment {
            id: 2,
            file: "wed.csv".into(),
            expected_rows: Some(692_703),
            expected_malignant_pct: Some(36.48),
        };
        let mk = |n: usize, m: usize| FlowParse {
            records: (0..n)
                .map(|i| FlowRecord {
                    features: vec![],
                    label: u8::from(i < m),
                    attack_tag: None,
                })
                .collect(),
            skipped: 0,
        };
        let m = (692_703.0_f64 * 0.3648).round() as usize;
        assert!(check(&a, &mk(692_703, m)).is_empty());
        // 1 pp off
        let w = check(&a, &mk(692_703, m - 6_927));
        assert_eq!(w.len(), 1);
        assert!(w[0].message.contains("malignant"));
        assert_eq!(check(&a, &mk(600_000, m)).len(), 2);
    }
}
