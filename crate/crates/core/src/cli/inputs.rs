use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::data::Samples;
use crate::ingest::{parse_flow_csv, records_to_samples, schema_hash, FlowSchema, LabeledTable};
use crate::neuralnet::FlatWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `timestamp,<features...>,label` as written by `featurize`.
    Table,
    /// Labeled flow export with the 78-feature flow schema.
    Flow,
}

pub struct Dataset {
    pub samples: Samples,
    pub schema_hash: String,
}

pub fn flow_schema(path: Option<&PathBuf>) -> Result<FlowSchema, CliError> {
    match path {
        Some(p) => Ok(FlowSchema::load(p)?),
        None => Ok(FlowSchema::default()),
    }
}

pub fn load_dataset(path: &Path, format: DataFormat, schema: &FlowSchema) -> Result<Dataset, CliError> {
    let ds = match format {
        DataFormat::Table => {
            let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            let t = LabeledTable::read_csv(std::io::BufReader::new(f))
                .map_err(|e| CliError::from(e).context(path))?;
            Dataset {
                schema_hash: schema_hash(&t.columns),
                samples: t.samples,
            }
        }
        DataFormat::Flow => {
            let parsed = parse_flow_csv(path, schema).map_err(|e| CliError::from(e).context(path))?;
            if parsed.skipped > 0 {
                log::warn!("{}: skipped {} rows with non-finite features", path.display(), parsed.skipped);
            }
            Dataset {
                samples: records_to_samples(&parsed.records),
                schema_hash: schema.schema_hash(),
            }
        }
    };
    if ds.samples.is_empty() {
        return Err(CliError::Data(format!("{}: no samples", path.display())));
    }
    Ok(ds)
}

impl CliError {
    pub(crate) fn context(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            CliError::Data(m) => CliError::Data(format!("{p}: {m}")),
            CliError::Usage(m) => CliError::Usage(format!("{p}: {m}")),
            CliError::Format(m) => CliError::Format(format!("{p}: {m}")),
            CliError::Unavailable(m) if m.starts_with(&p.to_string()) => CliError::Unavailable(m),
            CliError::Unavailable(m) => CliError::Unavailable(format!("{p}: {m}")),
        }
    }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
    let got = rdr
        .headers()
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?
        .clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(CliError::Format(format!(
            "{}: row 1: expected header {}, got {}",
            path.display(),
            header.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(rdr)
}

fn records(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, CliError> {
    let mut rdr = open_csv(path, header)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // row numbers count the header as row 1
        let row = i as u64 + 2;
        let rec = rec.map_err(|e| CliError::Format(format!("{}: row {row}: {e}", path.display())))?;
        out.push((row, rec));
    }
    Ok(out)
}

fn number(path: &Path, row: u64, field: &str) -> Result<f64, CliError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Format(format!("{}: row {row}: `{field}` is not a finite number", path.display()))),
    }
}

/// `group,value` rows; groups keep first-appearance order.
pub fn read_grouped(path: &Path) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (row, rec) in records(path, &["group", "value"])? {
        let v = number(path, row, &rec[1])?;
        match groups.iter_mut().find(|(g, _)| g == &rec[0]) {
            Some((_, vals)) => vals.push(v),
            None => groups.push((rec[0].to_string(), vec![v])),
        }
    }
    if groups.is_empty() {
        return Err(CliError::Data(format!("{}: no samples", path.display())));
    }
    Ok(groups)
}

/// `score,label` rows with labels 0/1.
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<u8>), CliError> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in records(path, &["score", "label"])? {
        scores.push(number(path, row, &rec[0])?);
        labels.push(match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(CliError::Format(format!("{}: row {row}: label `{other}` is not 0 or 1", path.display())))
            }
        });
    }
    if scores.is_empty() {
        return Err(CliError::Data(format!("{}: no samples", path.display())));
    }
    Ok((scores, labels))
}

/// Weights in the binary layout or as JSON.
pub fn load_weights(path: &Path) -> Result<FlatWeights, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let parsed = if bytes.starts_with(b"SFWT") {
        FlatWeights::from_bytes(&bytes)
    } else {
        FlatWeights::from_json(&String::from_utf8_lossy(&bytes))
    };
    parsed.map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}
