use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::inputs::{flow_schema, DataFormat};
use super::{CliError, Outputs};
use crate::analytics::report::{line_chart_svg, Series};
use crate::artifact::{ModelArtifact, SavedModel};
use crate::data::{Samples, Standardizer};
use crate::federated::{
    build_agents, drive, run_experiment_wire, AuditEntry, Experiment, FlPlan, InProcess, RoundReport,
};
use crate::ingest::{partition_non_iid, records_to_samples, schema_hash, LabeledTable, ShardSpec, ShardWarning};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FederateArgs {
    /// Federated plan JSON (rounds, per-client optimizer settings, seed).
    #[arg(long)]
    pub plan: PathBuf,
    /// Shard spec JSON, or a directory containing `shards.json`. Shard files resolve against its directory.
    #[arg(long)]
    pub shards: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Flow)]
    pub format: DataFormat,
    /// Flow schema JSON for `--format flow`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Overrides the plan's round count.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Overrides the plan's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run clients as HTTP peers of a coordinator bound here instead of in-process.
    #[arg(long)]
    pub wire: Option<SocketAddr>,
    #[arg(long)]
    pub out: PathBuf,
}

/// `experiment.json`: everything about a run except wall-clock timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub plan: FlPlan,
    pub schema_hash: String,
    pub input_dim: usize,
    pub shard_rows: BTreeMap<u32, usize>,
    pub shard_warnings: Vec<ShardWarning>,
    pub rounds: Vec<RoundReport>,
    pub final_accuracy: f64,
    pub final_weights_sha256: String,
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Serialize)]
struct RoundTiming {
    round: usize,
    aggregate_secs: f64,
    client_train_secs: BTreeMap<u32, f64>,
}

struct Shards {
    samples: BTreeMap<u32, Samples>,
    schema_hash: String,
    warnings: Vec<ShardWarning>,
    files: Vec<PathBuf>,
}

fn load_shards(args: &FederateArgs) -> Result<Shards, CliError> {
    let spec_path = if args.shards.is_dir() {
        args.shards.join("shards.json")
    } else {
        args.shards.clone()
    };
    let spec = ShardSpec::load(&spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut files = vec![spec_path.clone()];
    files.extend(spec.shards.iter().map(|s| base.join(&s.file)));
    match args.format {
        DataFormat::Flow => {
            let schema = flow_schema(args.schema.as_ref())?;
            let part = partition_non_iid(&spec, &schema, &base)?;
            Ok(Shards {
                samples: part.shards.iter().map(|(&id, r)| (id, records_to_samples(r))).collect(),
                schema_hash: schema.schema_hash(),
                warnings: part.warnings,
                files,
            })
        }
        DataFormat::Table => {
            let mut samples: BTreeMap<u32, Samples> = BTreeMap::new();
            let mut columns: Option<Vec<String>> = None;
            for a in &spec.shards {
                let p = base.join(&a.file);
                let f = std::fs::File::open(&p).map_err(|e| CliError::io(&p, e))?;
                let t = LabeledTable::read_csv(std::io::BufReader::new(f)).map_err(|e| CliError::from(e).context(&p))?;
                match &columns {
                    Some(c) if *c != t.columns => {
                        return Err(CliError::Format(format!("{}: columns differ from the other shards", p.display())))
                    }
                    _ => columns = Some(t.columns.clone()),
                }
                match samples.get_mut(&a.id) {
                    Some(s) => s.extend(&t.samples),
                    None => {
                        samples.insert(a.id, t.samples);
                    }
                }
            }
            Ok(Shards {
                samples,
                schema_hash: schema_hash(&columns.unwrap_or_default()),
                warnings: Vec::new(),
                files,
            })
        }
    }
}

fn accuracy_outputs(out: &mut Outputs, rounds: &[RoundReport]) -> Result<(), CliError> {
    let ids: Vec<u32> = rounds.first().map_or(Vec::new(), |r| r.per_client.iter().map(|c| c.client_id).collect());
    let mut header = vec!["round".to_string(), "global_accuracy".to_string()];
    header.extend(ids.iter().map(|id| format!("client_{id}")));
    let rows: Vec<Vec<String>> = rounds
        .iter()
        .map(|r| {
            let mut row = vec![r.round.to_string(), r.global_accuracy.to_string()];
            row.extend(r.per_client.iter().map(|c| c.eval_accuracy.to_string()));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("accuracy.csv", &header_refs, &rows)?;

    let global: Vec<(f64, f64)> = rounds.iter().map(|r| (r.round as f64, r.global_accuracy)).collect();
    let per_client: Vec<(String, Vec<(f64, f64)>)> = ids
        .iter()
        .enumerate()
        .map(|(j, id)| {
            let pts = rounds.iter().map(|r| (r.round as f64, r.per_client[j].eval_accuracy)).collect();
            (format!("agent {id}"), pts)
        })
        .collect();
    let mut series = vec![Series {
        name: "global",
        points: &global,
    }];
    series.extend(per_client.iter().map(|(name, pts)| Series { name, points: pts }));
    out.write("accuracy.svg", line_chart_svg("Accuracy per federated round", "round", "accuracy", &series))?;

    let rows: Vec<Vec<String>> = rounds
        .iter()
        .flat_map(|r| {
            r.per_client
                .iter()
                .map(move |c| vec![r.round.to_string(), c.client_id.to_string(), c.divergence.to_string()])
        })
        .collect();
    out.write_csv("divergence.csv", &["round", "client_id", "divergence"], &rows)
}

pub fn run(args: &FederateArgs) -> Result<(), CliError> {
    let mut plan = FlPlan::load(&args.plan)?;
    if let Some(r) = args.rounds {
        plan.rounds = r;
    }
    if let Some(s) = args.seed {
        plan.seed = s;
    }
    plan.validate()?;
    let mut out = Outputs::create(&args.out, "federate", args, Some(plan.seed))?;
    out.input(&args.plan)?;
    let shards = load_shards(args)?;
    for f in &shards.files {
        out.input(f)?;
    }

    let agents = build_agents(&plan, &shards.samples)?;
    let input_dim = agents[0].input_dim();
    let standardizers: Vec<(u32, Standardizer)> =
        agents.iter().map(|a| (a.id(), a.standardizer().clone())).collect();
    let experiment: Experiment = match args.wire {
        Some(bind) => {
            drop(agents);
            run_experiment_wire(&plan, &shards.samples, bind)?
        }
        None => drive(&plan, input_dim, &mut InProcess::new(agents))?,
    };

    let weight_bytes = experiment.final_weights.to_bytes();
    out.write("global_weights.sfw", &weight_bytes)?;
    for (id, std) in standardizers {
        let artifact = ModelArtifact {
            schema_hash: shards.schema_hash.clone(),
            model: SavedModel::Mlp {
                weights: experiment.final_weights.clone(),
                standardizer: std,
            },
            metrics: None,
        };
        let p = out.path(&format!("models/client_{id}.json"))?;
        artifact.save(&p)?;
    }

    accuracy_outputs(&mut out, &experiment.rounds)?;
    let timings: Vec<RoundTiming> = experiment
        .rounds
        .iter()
        .map(|r| RoundTiming {
            round: r.round,
            aggregate_secs: r.aggregate_time_secs,
            client_train_secs: r.per_client.iter().map(|c| (c.client_id, c.train_time_secs)).collect(),
        })
        .collect();
    out.write_json("timings.json", &timings)?;

    let record = ExperimentRecord {
        schema_hash: shards.schema_hash,
        input_dim,
        shard_rows: shards.samples.iter().map(|(&id, s)| (id, s.len())).collect(),
        shard_warnings: shards.warnings,
        final_accuracy: experiment.final_accuracy(),
        final_weights_sha256: super::hex_sha256(&weight_bytes),
        rounds: experiment.rounds,
        audit: experiment.audit,
        plan,
    };
    println!(
        "{} rounds, {} clients: final global accuracy {:.4}",
        record.rounds.len(),
        record.plan.clients.len(),
        record.final_accuracy
    );
    out.write_json("experiment.json", &record)?;
    out.commit()?;
    Ok(())
}
