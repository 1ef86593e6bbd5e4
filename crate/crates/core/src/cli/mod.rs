//! Operator entry point: one binary, one subcommand per pipeline stage.
//!
//! Every command writes its outputs into `--out` together with a
//! `run_manifest.json` recording input and output digests. Outputs are
//! staged and moved into place only when the command succeeds.

mod analyze;
mod featurize;
mod federate;
mod inputs;
mod serve;
mod train;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::AnalyticsError;
use crate::artifact::ArtifactError;
use crate::classical::ClassicalError;
use crate::federated::FedError;
use crate::ingest::IngestError;
use crate::neuralnet::NnError;
use crate::service::ServiceError;

pub use analyze::AnalyzeArgs;
pub use featurize::FeaturizeArgs;
pub use federate::{ExperimentRecord, FederateArgs};
pub use serve::ServeArgs;
pub use train::{TrainArgs, TrainAlgo, TrainReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_FORMAT: i32 = 65;
pub const EXIT_UNAVAILABLE: i32 = 69;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "slicefed", version, about = "Federated anomaly and intrusion detection for network-slice telemetry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand, join, label and rebalance telemetry into a behavioral dataset.
    Featurize(FeaturizeArgs),
    /// Fit one detector, or cross-validate it with --cv.
    Train(TrainArgs),
    /// Run a federated experiment over agent shards.
    Federate(FederateArgs),
    /// Statistics and reports over existing outputs.
    Analyze(AnalyzeArgs),
    /// Serve predictions from a model file or a registry directory.
    Serve(ServeArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Empty input or data that cannot support the requested operation.
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Unavailable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => EXIT_DATA,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Format(_) => EXIT_FORMAT,
            CliError::Unavailable(_) => EXIT_UNAVAILABLE,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Unavailable(format!("{}: {e}", path.display()))
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        use IngestError::*;
        let msg = e.to_string();
        match e {
            NoSamples | EmptyInput | Unlabeled | Unachievable { .. } | ShardEmpty { .. } => CliError::Data(msg),
            Io { .. } => CliError::Unavailable(msg),
            _ => CliError::Format(msg),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        use AnalyticsError::*;
        let msg = e.to_string();
        match e {
            LengthMismatch(..) | Invalid(_) => CliError::Format(msg),
            Empty | SingleClass | ZeroVector | DegenerateData | DegenerateVariance => CliError::Data(msg),
        }
    }
}

impl From<ClassicalError> for CliError {
    fn from(e: ClassicalError) -> Self {
        let msg = e.to_string();
        match e {
            ClassicalError::InvalidConfig(_) => CliError::Usage(msg),
            ClassicalError::DimensionMismatch { .. } => CliError::Format(msg),
            ClassicalError::Analytics(a) => a.into(),
            ClassicalError::EmptyData | ClassicalError::TooFewSamples { .. } => CliError::Data(msg),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        let msg = e.to_string();
        match e {
            NnError::EmptyData | NnError::NonFiniteInput { .. } | NnError::BadLabel(_) => CliError::Data(msg),
            NnError::InvalidConfig(_) => CliError::Usage(msg),
            _ => CliError::Format(msg),
        }
    }
}

impl From<FedError> for CliError {
    fn from(e: FedError) -> Self {
        let msg = e.to_string();
        match e {
            FedError::Io(..) | FedError::Wire(_) => CliError::Unavailable(msg),
            FedError::Nn(n) => n.into(),
            FedError::Analytics(a) => a.into(),
            FedError::ClientFailure { .. } | FedError::EmptyUpdates => CliError::Data(msg),
            _ => CliError::Format(msg),
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        match e {
            ArtifactError::Io(..) => CliError::Unavailable(e.to_string()),
            _ => CliError::Format(e.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(..) => CliError::Unavailable(e.to_string()),
            ServiceError::NotFound(_) | ServiceError::InvalidModelId(_) => CliError::Usage(e.to_string()),
            _ => CliError::Format(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub input_digests: Vec<FileDigest>,
    pub output_paths: Vec<FileDigest>,
    /// Unix milliseconds.
    pub started: u64,
    pub finished: u64,
    pub tool_version: String,
}

pub(crate) fn hex_sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex_sha256(&bytes))
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Output directory with staging: files go to a hidden sibling directory
/// and are moved into `--out` by [`Outputs::commit`]. Dropping without
/// committing removes everything written so far.
pub(crate) struct Outputs {
    out: PathBuf,
    stage: PathBuf,
    files: Vec<String>,
    inputs: Vec<FileDigest>,
    command: String,
    config_digest: String,
    seed: Option<u64>,
    started: u64,
    committed: bool,
}

impl Outputs {
    pub fn create<C: Serialize>(out: &Path, command: &str, config: &C, seed: Option<u64>) -> Result<Self, CliError> {
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let stage = out.join(format!(".staging-{}", std::process::id()));
        if stage.exists() {
            std::fs::remove_dir_all(&stage).map_err(|e| CliError::io(&stage, e))?;
        }
        std::fs::create_dir_all(&stage).map_err(|e| CliError::io(&stage, e))?;
        let config_json = serde_json::to_vec(config).expect("config serializes");
        Ok(Outputs {
            out: out.to_path_buf(),
            stage,
            files: Vec::new(),
            inputs: Vec::new(),
            command: command.to_string(),
            config_digest: hex::encode(Sha256::digest(&config_json)),
            seed,
            started: now_millis(),
            committed: false,
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Staged path for a relative output name; registers it for commit.
    pub fn path(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.stage.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(p)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.path(name)?;
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("output serializes");
        text.push('\n');
        self.write(name, text)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let p = self.path(name)?;
        let f = std::fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
        crate::analytics::report::write_csv(std::io::BufWriter::new(f), header, rows).map_err(|e| CliError::io(&p, e))
    }

    /// Moves staged files into place and writes the run manifest last.
    pub fn commit(mut self) -> Result<RunManifest, CliError> {
        let mut outputs = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let from = self.stage.join(name);
            let to = self.out.join(name);
            if let Some(parent) = to.parent() {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            let sha256 = sha256_file(&from)?;
            std::fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
            outputs.push(FileDigest {
                path: name.clone(),
                sha256,
            });
        }
        let manifest = RunManifest {
            command: self.command.clone(),
            config_digest: self.config_digest.clone(),
            seed: self.seed,
            input_digests: std::mem::take(&mut self.inputs),
            output_paths: outputs,
            started: self.started,
            finished: now_millis(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let tmp = self.stage.join(MANIFEST_FILE);
        let to = self.out.join(MANIFEST_FILE);
        std::fs::write(&tmp, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
            .map_err(|e| CliError::io(&tmp, e))?;
        std::fs::rename(&tmp, &to).map_err(|e| CliError::io(&to, e))?;
        self.committed = true;
        let _ = std::fs::remove_dir_all(&self.stage);
        Ok(manifest)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_dir_all(&self.stage);
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Featurize(a) => featurize::run(&a),
        Command::Train(a) => train::run(&a).map(|_| ()),
        Command::Federate(a) => federate::run(&a).map(|_| ()),
        Command::Analyze(a) => analyze::run(&a),
        Command::Serve(a) => serve::run(&a),
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
