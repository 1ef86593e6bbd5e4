use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{CliError, Outputs};
use crate::ingest::{
    expand_telemetry, label_windows, load_windows, parse_telemetry_csv, rebalance, schema_hash, timestamp_join,
    IngestError, MetricManifest, TelemetrySample,
};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FeaturizeArgs {
    /// Long-format telemetry CSV (entity_id,timestamp,metric,attribute,value); repeatable.
    #[arg(long = "telemetry", required = true)]
    pub telemetry: Vec<PathBuf>,
    /// Metric manifest JSON; defaults to the built-in 42-column schema.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Attack windows JSON, `[{"start": s, "end": e}, ...]`; rows outside are benign.
    #[arg(long)]
    pub windows: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    pub benign_ratio: f64,
    /// Write only the joined, labeled table.
    #[arg(long)]
    pub no_rebalance: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Summary {
    entities: Vec<String>,
    columns: usize,
    schema_hash: String,
    joined_rows: usize,
    joined_malignant: usize,
    rebalanced_rows: Option<usize>,
    rebalanced_malignant: Option<usize>,
}

fn read_samples(path: &Path) -> Result<Vec<TelemetrySample>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    parse_telemetry_csv(path).map_err(|e| CliError::from(e).context(path))
}

pub fn run(args: &FeaturizeArgs) -> Result<(), CliError> {
    let mut out = Outputs::create(&args.out, "featurize", args, Some(args.seed))?;
    let manifest = match &args.manifest {
        Some(p) => {
            out.input(p)?;
            MetricManifest::load(p)?
        }
        None => MetricManifest::default(),
    };

    let mut by_entity: BTreeMap<String, Vec<TelemetrySample>> = BTreeMap::new();
    for p in &args.telemetry {
        out.input(p)?;
        for s in read_samples(p)? {
            by_entity.entry(s.entity_id.clone()).or_default().push(s);
        }
    }
    if by_entity.is_empty() {
        return Err(IngestError::NoSamples.into());
    }
    let tables = by_entity
        .values()
        .map(|samples| expand_telemetry(samples, &manifest))
        .collect::<Result<Vec<_>, _>>()?;
    let joined = if tables.len() == 1 {
        tables.into_iter().next().expect("one table")
    } else {
        let prefixed: Vec<_> = tables.iter().map(|t| t.prefixed()).collect();
        timestamp_join(&prefixed)?
    };

    let windows = match &args.windows {
        Some(p) => {
            out.input(p)?;
            load_windows(p)?
        }
        None => Vec::new(),
    };
    let labeled = label_windows(&joined, &windows)?;
    let labels = labeled.labels.as_ref().expect("labeled");

    let mut buf = Vec::new();
    labeled
        .write_csv(&mut buf, &manifest.label_column)
        .map_err(|e| CliError::Unavailable(e.to_string()))?;
    out.write("joined.csv", buf)?;

    let mut summary = Summary {
        entities: by_entity.keys().cloned().collect(),
        columns: labeled.width(),
        schema_hash: schema_hash(&labeled.columns),
        joined_rows: labeled.rows(),
        joined_malignant: labels.iter().filter(|&&l| l == 1).count(),
        rebalanced_rows: None,
        rebalanced_malignant: None,
    };
    if !args.no_rebalance {
        let table = rebalance(&labeled, args.benign_ratio, args.seed)?;
        let mut buf = Vec::new();
        table
            .write_csv(&mut buf, &manifest.label_column)
            .map_err(|e| CliError::Unavailable(e.to_string()))?;
        out.write("behavioral.csv", buf)?;
        summary.rebalanced_rows = Some(table.samples.len());
        summary.rebalanced_malignant = Some(table.samples.positives());
    }
    log::info!(
        "{} entities, {} rows x {} columns",
        summary.entities.len(),
        summary.joined_rows,
        summary.columns
    );
    out.write_json("featurize_summary.json", &summary)?;
    out.commit()?;
    Ok(())
}
