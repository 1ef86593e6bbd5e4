use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, MetricKey, MetricManifest};

/// One metric reading for one slice entity at one-second resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub entity_id: String,
    pub timestamp: i64,
    pub metric: String,
    #[serde(default)]
    pub attribute: String,
    pub value: f64,
}

/// Timestamp-indexed wide table of telemetry features for one entity (or a join of several).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralDataset {
    pub entity_id: String,
    pub timestamps: Vec<i64>,
    pub columns: Vec<String>,
    /// Row-major, `timestamps.len() * columns.len()` cells.
    pub matrix: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

impl BehavioralDataset {
    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.matrix[i * w..(i + 1) * w]
    }

    /// Same table with every column renamed `entity.column`, ready for a multi-entity join.
    pub fn prefixed(&self) -> BehavioralDataset {
        let mut out = self.clone();
        out.columns = self
            .columns
            .iter()
            .map(|c| format!("{}.{}", self.entity_id, c))
            .collect();
        out
    }

    /// Writes `timestamp,<columns...>[,label]` CSV.
    pub fn write_csv<W: std::io::Write>(&self, w: W, label_column: &str) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.iter().cloned());
        if self.labels.is_some() {
            header.push(label_column.to_string());
        }
        wr.write_record(&header)?;
        for i in 0..self.rows() {
            let mut rec = vec![self.timestamps[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            if let Some(labels) = &self.labels {
                rec.push(labels[i].to_string());
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(t) = raw.parse::<i64>() {
        return Some(t);
    }
    // sub-second inputs are truncated to whole seconds
    raw.parse::<f64>()
        .ok()
        .filter(|t| t.is_finite())
        .map(|t| t.trunc() as i64)
}

/// Reads `entity_id,timestamp,metric,attribute,value` rows.
pub fn parse_telemetry_reader<R: Read>(reader: R) -> Result<Vec<TelemetrySample>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let (ie, it, im, ia, iv) = (
        idx("entity_id")?,
        idx("timestamp")?,
        idx("metric")?,
        idx("attribute")?,
        idx("value")?,
    );
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let timestamp = parse_timestamp(field(it)).ok_or_else(|| IngestError::BadValue {
            line,
            column: "timestamp".into(),
            value: field(it).to_string(),
        })?;
        let value: f64 = field(iv).parse().map_err(|_| IngestError::BadValue {
            line,
            column: "value".into(),
            value: field(iv).to_string(),
        })?;
        out.push(TelemetrySample {
            entity_id: field(ie).to_string(),
            timestamp,
            metric: field(im).to_string(),
            attribute: field(ia).to_string(),
            value,
        });
    }
    Ok(out)
}

pub fn parse_telemetry_csv(path: &Path) -> Result<Vec<TelemetrySample>, IngestError> {
    let f = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_telemetry_reader(f)
}

pub(crate) fn csv_err(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Csv {
        line,
        message: e.to_string(),
    }
}

/// Pivots one entity's samples into the manifest's wide schema.
///
/// One row per distinct timestamp. A cell takes the last sample for its key
/// at that second; keys without a sample carry the previous row's value
/// forward, or 0.0 before the key's first sample.
pub fn expand_telemetry(
    samples: &[TelemetrySample],
    manifest: &MetricManifest,
) -> Result<BehavioralDataset, IngestError> {
    let first = samples.first().ok_or(IngestError::NoSamples)?;
    let column_of: HashMap<&MetricKey, usize> = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();

    let width = manifest.len();
    let mut by_time: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
    for s in samples {
        if s.entity_id != first.entity_id {
            return Err(IngestError::MixedEntities(
                first.entity_id.clone(),
                s.entity_id.clone(),
            ));
        }
        let key = MetricKey::new(&s.metric, &s.attribute);
        let col = *column_of.get(&key).ok_or_else(|| IngestError::UnknownMetric {
            metric: s.metric.clone(),
            attribute: s.attribute.clone(),
        })?;
        by_time.entry(s.timestamp).or_insert_with(|| vec![None; width])[col] = Some(s.value);
    }

    let mut carry = vec![0.0; width];
    let mut matrix = Vec::with_capacity(by_time.len() * width);
    let mut timestamps = Vec::with_capacity(by_time.len());
    for (t, cells) in by_time {
        for (c, cell) in carry.iter_mut().zip(cells) {
            if let Some(v) = cell {
                *c = v;
            }
        }
        matrix.extend_from_slice(&carry);
        timestamps.push(t);
    }
    Ok(BehavioralDataset {
        entity_id: first.entity_id.clone(),
        timestamps,
        columns: manifest.column_names(),
        matrix,
        labels: None,
    })
}

/// Union of the tables on timestamp. Each table contributes its most recent
/// row at or before every output timestamp (zeros before its first row).
pub fn timestamp_join(tables: &[BehavioralDataset]) -> Result<BehavioralDataset, IngestError> {
    if tables.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut seen = HashSet::new();
    for t in tables {
        if t.labels.is_some() {
            return Err(IngestError::AlreadyLabeled(t.entity_id.clone()));
        }
        for c in &t.columns {
            if !seen.insert(c.as_str()) {
                return Err(IngestError::DuplicateColumn(c.clone()));
            }
        }
    }
    let mut timestamps: Vec<i64> = tables.iter().flat_map(|t| t.timestamps.iter().copied()).collect();
    timestamps.sort_unstable();
    timestamps.dedup();

    let width: usize = tables.iter().map(BehavioralDataset::width).sum();
    let mut matrix = Vec::with_capacity(timestamps.len() * width);
    let mut cursors = vec![0usize; tables.len()];
    for &t in &timestamps {
        for (table, cursor) in tables.iter().zip(cursors.iter_mut()) {
            while *cursor < table.rows() && table.timestamps[*cursor] <= t {
                *cursor += 1;
            }
            if *cursor == 0 {
                matrix.extend(std::iter::repeat_n(0.0, table.width()));
            } else {
                matrix.extend_from_slice(table.row(*cursor - 1));
            }
        }
    }
    Ok(BehavioralDataset {
        entity_id: tables
            .iter()
            .map(|t| t.entity_id.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        timestamps,
        columns: tables.iter().flat_map(|t| t.columns.iter().cloned()).collect(),
        matrix,
        labels: None,
    })
}

/// Inclusive `[start, end]` interval of attack traffic, in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackWindow {
    pub start: i64,
    pub end: i64,
}

pub fn load_windows(path: &Path) -> Result<Vec<AttackWindow>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| IngestError::Manifest(format!("{}: {e}", path.display())))
}

fn normalize(windows: &[AttackWindow]) -> Result<Vec<AttackWindow>, IngestError> {
    let mut ws = windows.to_vec();
    if let Some(w) = ws.iter().find(|w| w.start > w.end) {
        return Err(IngestError::BadWindow {
            start: w.start,
            end: w.end,
        });
    }
    ws.sort_by_key(|w| (w.start, w.end));
    let mut merged: Vec<AttackWindow> = Vec::with_capacity(ws.len());
    for w in ws {
        match merged.last_mut() {
            Some(last) if w.start <= last.end.saturating_add(1) => last.end = last.end.max(w.end),
            _ => merged.push(w),
        }
    }
    Ok(merged)
}

/// Labels rows inside any window (inclusive bounds) malignant, all others benign.
pub fn label_windows(
    ds: &BehavioralDataset,
    windows: &[AttackWindow],
) -> Result<BehavioralDataset, IngestError> {
    let windows = normalize(windows)?;
    let labels = ds
        .timestamps
        .iter()
        .map(|&t| {
            // windows are sorted and disjoint: the candidate is the last one starting at or before t
            let idx = windows.partition_point(|w| w.start <= t);
            u8::from(idx > 0 && windows[idx - 1].end >= t)
        })
        .collect();
    let mut out = ds.clone();
    out.labels = Some(labels);
    Ok(out)
}
