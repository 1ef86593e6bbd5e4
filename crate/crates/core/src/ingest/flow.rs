use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::telemetry::csv_err;
use super::{FlowSchema, IngestError, FLOW_FEATURES};
use crate::data::Samples;

/// One network flow: 78 finite features and a binary label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub features: Vec<f64>,
    pub label: u8,
    pub attack_tag: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct FlowParse {
    pub records: Vec<FlowRecord>,
    /// Data rows dropped because a feature was NaN or infinite.
    pub skipped: usize,
}

impl FlowParse {
    pub fn malignant_pct(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let m = self.records.iter().filter(|r| r.label == 1).count();
        100.0 * m as f64 / self.records.len() as f64
    }
}

// Exported headers carry stray whitespace and one repeated column name;
// repeats get ".1", ".2", ... suffixes.
fn normalized_headers(raw: &csv::StringRecord) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    raw.iter()
        .map(|h| {
            let h = h.trim().to_string();
            let n = seen.entry(h.clone()).or_insert(0);
            let name = if *n == 0 { h } else { format!("{h}.{n}") };
            *n += 1;
            name
        })
        .collect()
}

fn parse_label(raw: &str, line: u64) -> Result<(u8, Option<String>), IngestError> {
    let v = raw.trim();
    if v.is_empty() {
        Err(IngestError::BadLabel {
            line,
            value: raw.to_string(),
        })
    } else if v.eq_ignore_ascii_case("BENIGN") {
        Ok((0, None))
    } else {
        Ok((1, Some(v.to_string())))
    }
}

pub fn parse_flow_reader<R: Read>(reader: R, schema: &FlowSchema) -> Result<FlowParse, IngestError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = normalized_headers(rdr.headers().map_err(csv_err)?);
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let feature_idx = schema
        .features
        .iter()
        .map(|f| position(f))
        .collect::<Result<Vec<_>, _>>()?;
    let label_idx = position(&schema.label)?;

    let mut out = FlowParse::default();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_err(e)),
        }
        let line = rec.position().map_or(0, |p| p.line());
        let mut features = Vec::with_capacity(FLOW_FEATURES);
        for (slot, &col) in feature_idx.iter().enumerate() {
            let raw = rec.get(col).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| IngestError::BadValue {
                line,
                column: schema.features[slot].clone(),
                value: raw.to_string(),
            })?;
            features.push(v);
        }
        let (label, attack_tag) = parse_label(rec.get(label_idx).unwrap_or(""), line)?;
        if features.iter().all(|v| v.is_finite()) {
            out.records.push(FlowRecord {
                features,
                label,
                attack_tag,
            });
        } else {
            out.skipped += 1;
        }
    }
    Ok(out)
}

/// Parses a flow CSV in file order, dropping rows with non-finite features.
pub fn parse_flow_csv(path: &Path, schema: &FlowSchema) -> Result<FlowParse, IngestError> {
    let f = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_flow_reader(std::io::BufReader::new(f), schema)
}

pub fn records_to_samples(records: &[FlowRecord]) -> Samples {
    let mut s = Samples::new(FLOW_FEATURES);
    for r in records {
        s.push(&r.features, r.label);
    }
    s
}
