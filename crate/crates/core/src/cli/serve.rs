use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{CliError, Outputs};
use crate::artifact::ModelArtifact;
use crate::ingest::FlowSchema;
use crate::service::{http, Registry, Service, VersionSel};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ServeArgs {
    /// Model file written by `train` or `federate`; registered and activated at start.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Registry id for `--model`; defaults to the file stem.
    #[arg(long)]
    pub model_id: Option<String>,
    /// Persistent registry directory; in-memory when omitted.
    #[arg(long, env = "SLICEFED_REGISTRY")]
    pub registry: Option<PathBuf>,
    /// Serving schema digest; defaults to the model's, else the 78-feature flow schema.
    #[arg(long)]
    pub schema_hash: Option<String>,
    #[arg(long, env = "SLICEFED_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long, env = "SLICEFED_THRESHOLD", default_value_t = 0.5)]
    pub threshold: f64,
    /// Receives the latency report and run manifest on shutdown.
    #[arg(long)]
    pub out: PathBuf,
}

fn sanitize(stem: &str) -> String {
    stem.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

fn build(args: &ServeArgs, out: &mut Outputs) -> Result<Service, CliError> {
    if !(args.threshold > 0.0 && args.threshold <= 1.0) {
        return Err(CliError::Usage(format!("threshold {} is outside (0, 1]", args.threshold)));
    }
    let registry = match &args.registry {
        Some(dir) => Registry::open(dir)?,
        None => Registry::in_memory(),
    };
    let artifact = match &args.model {
        Some(p) => {
            out.input(p)?;
            Some(ModelArtifact::load(p)?)
        }
        None => None,
    };
    let schema = args
        .schema_hash
        .clone()
        .or_else(|| artifact.as_ref().map(|a| a.schema_hash.clone()))
        .unwrap_or_else(|| FlowSchema::default().schema_hash());
    let svc = Service::new(registry, schema, args.threshold);
    if let (Some(a), Some(p)) = (artifact, &args.model) {
        let id = args.model_id.clone().unwrap_or_else(|| {
            sanitize(&p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into()))
        });
        let bytes = a.model.to_bytes();
        // restarts against a persistent registry reuse the stored version
        let existing = svc
            .registry()
            .get(&id, VersionSel::Latest)
            .ok()
            .filter(|r| r.weights == bytes && r.schema_hash == a.schema_hash);
        let version = match existing {
            Some(r) => r.version,
            None => svc.registry().put(&id, a.model.kind(), bytes, &a.schema_hash, a.metrics)?,
        };
        svc.activate(&id, VersionSel::Exact(version))?;
    }
    Ok(svc)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down");
}

pub fn run(args: &ServeArgs) -> Result<(), CliError> {
    let mut out = Outputs::create(&args.out, "serve", args, None)?;
    let svc = Arc::new(build(args, &mut out)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Unavailable(e.to_string()))?;
    let listener = rt
        .block_on(tokio::net::TcpListener::bind(args.bind))
        .map_err(|e| CliError::Unavailable(format!("bind {}: {e}", args.bind)))?;
    let addr = listener.local_addr().map_err(|e| CliError::Unavailable(e.to_string()))?;
    log::info!("listening on http://{addr}");
    eprintln!("listening on http://{addr}");
    let app = http::router(svc.clone());
    rt.block_on(async move { axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await })
        .map_err(|e| CliError::Unavailable(e.to_string()))?;
    out.write_json("latency.json", &svc.latency().snapshot())?;
    out.commit()?;
    Ok(())
}
