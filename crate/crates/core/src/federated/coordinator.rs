use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::client::{derive_seed, ClientAgent};
use super::messages::{Message, Phase};
use super::{aggregate, Aggregation, ClientConfig, FedError, FlPlan};
use crate::analytics::cosine_divergence;
use crate::data::{Samples, Standardizer};
use crate::neuralnet::{EpochStats, FlatWeights, MlpModel, OptimizerKind};

/// One payload seen at the coordinator boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub round: usize,
    pub client_id: Option<u32>,
    pub kind: String,
    /// Top-level JSON keys of the payload.
    pub fields: Vec<String>,
    /// Payload size; varies with the wall-clock metrics it carries, so not serialized.
    #[serde(skip)]
    pub bytes: usize,
}

/// Records every client-to-coordinator payload.
#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Mutex<Vec<AuditEntry>>,
}

impl AuditLog {
    pub fn record_json(&self, round: usize, payload: &serde_json::Value, bytes: usize) {
        let fields = payload
            .as_object()
            .map(|o| o.keys().cloned().collect())
            .unwrap_or_default();
        let entry = AuditEntry {
            round,
            client_id: payload.get("client_id").and_then(|v| v.as_u64()).map(|v| v as u32),
            kind: payload.get("type").and_then(|v| v.as_str()).unwrap_or("unknown").to_string(),
            fields,
            bytes,
        };
        self.entries.lock().expect("audit lock").push(entry);
    }

    pub fn record(&self, round: usize, msg: &Message) {
        let text = serde_json::to_string(msg).expect("message serializes");
        let value: serde_json::Value = serde_json::from_str(&text).expect("valid json");
        self.record_json(round, &value, text.len());
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        self.entries.lock().expect("audit lock").clone()
    }
}

/// Delivers a broadcast to every client and returns one reply per client,
/// ordered by client id. Returning is the round barrier.
pub trait Transport {
    fn exchange(&mut self, broadcast: &Message) -> Result<Vec<Message>, FedError>;
}

/// All clients in this process, one thread each per exchange.
pub struct InProcess {
    agents: Vec<ClientAgent>,
}

impl InProcess {
    pub fn new(mut agents: Vec<ClientAgent>) -> Self {
        agents.sort_by_key(ClientAgent::id);
        InProcess { agents }
    }
}

impl Transport for InProcess {
    fn exchange(&mut self, broadcast: &Message) -> Result<Vec<Message>, FedError> {
        Ok(std::thread::scope(|s| {
            let handles: Vec<_> = self
                .agents
                .iter()
                .map(|a| (a.id(), s.spawn(move || a.handle(broadcast))))
                .collect();
            handles
                .into_iter()
                .map(|(client_id, h)| {
                    h.join().unwrap_or_else(|_| Message::Failure {
                        client_id,
                        round: 0,
                        message: "client thread panicked".into(),
                    })
                })
                .collect()
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundStats {
    pub client_id: u32,
    pub n_train: u64,
    pub n_eval: u64,
    pub epochs_run: usize,
    pub final_loss: f64,
    /// The client's locally trained model on its held-out split.
    pub local_eval_accuracy: f64,
    /// The aggregated model on the client's held-out split.
    pub eval_accuracy: f64,
    /// Cosine divergence of the client's weights from the round's starting global model.
    pub divergence: f64,
    /// Wall-clock; excluded from serialized records so they stay reproducible.
    #[serde(skip)]
    pub train_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub per_client: Vec<ClientRoundStats>,
    /// Uniform mean of the per-client held-out accuracies under the aggregated model.
    pub global_accuracy: f64,
    #[serde(skip)]
    pub aggregate_time_secs: f64,
}

fn expect_ids(plan: &FlPlan) -> Vec<u32> {
    let mut ids: Vec<u32> = plan.clients.iter().map(|c| c.client_id).collect();
    ids.sort_unstable();
    ids
}

/// Collects replies, failing the round on any failure, a missing or
/// duplicate client, or a reply for another round.
fn check_replies(replies: &[Message], ids: &[u32], round: usize, want: &str) -> Result<(), FedError> {
    for r in replies {
        if let Message::Failure { client_id, message, .. } = r {
            return Err(FedError::ClientFailure {
                client_id: *client_id,
                message: message.clone(),
            });
        }
    }
    let got: Vec<u32> = replies.iter().filter_map(Message::client_id).collect();
    if got != ids {
        return Err(FedError::Wire(format!("round {round}: expected replies from {ids:?}, got {got:?}")));
    }
    for r in replies {
        let ok_round = matches!(r, Message::Update { round: x, .. } | Message::EvalReport { round: x, .. } if *x == round);
        if r.kind() != want || !ok_round {
            return Err(FedError::Wire(format!("round {round}: unexpected {} message", r.kind())));
        }
    }
    Ok(())
}

/// Broadcast, local training, divergence, aggregation, evaluation of the aggregate.
pub fn run_round(
    transport: &mut dyn Transport,
    audit: &AuditLog,
    global: &FlatWeights,
    plan: &FlPlan,
    round: usize,
) -> Result<(FlatWeights, RoundReport), FedError> {
    let ids = expect_ids(plan);
    let updates = transport.exchange(&Message::Broadcast {
        round,
        phase: Phase::Train,
        weights: global.clone(),
    })?;
    for u in &updates {
        audit.record(round, u);
    }
    check_replies(&updates, &ids, round, "update")?;

    let started = Instant::now();
    let mut stats = Vec::with_capacity(updates.len());
    let mut weights = Vec::with_capacity(updates.len());
    let mut counts = Vec::with_capacity(updates.len());
    for u in updates {
        let Message::Update {
            client_id,
            weights: w,
            metrics,
            ..
        } = u
        else {
            unreachable!("checked above")
        };
        if w.shape_tag != global.shape_tag {
            return Err(FedError::ShapeMismatch {
                expected: global.len(),
                got: w.len(),
            });
        }
        stats.push(ClientRoundStats {
            client_id,
            n_train: metrics.n_train,
            n_eval: 0,
            epochs_run: metrics.epochs_run,
            final_loss: metrics.final_loss,
            local_eval_accuracy: metrics.local_eval_accuracy,
            eval_accuracy: 0.0,
            divergence: cosine_divergence(&w.values, &global.values)?,
            train_time_secs: metrics.train_time_secs,
        });
        counts.push(metrics.n_train);
        weights.push(w);
    }
    let new_global = match plan.aggregation {
        Aggregation::Uniform => aggregate(&weights, Aggregation::Uniform, None)?,
        Aggregation::SampleWeighted => aggregate(&weights, Aggregation::SampleWeighted, Some(&counts))?,
    };
    let aggregate_time_secs = started.elapsed().as_secs_f64();

    let reports = transport.exchange(&Message::Broadcast {
        round,
        phase: Phase::Eval,
        weights: new_global.clone(),
    })?;
    for r in &reports {
        audit.record(round, r);
    }
    check_replies(&reports, &ids, round, "eval_report")?;
    for (s, r) in stats.iter_mut().zip(&reports) {
        if let Message::EvalReport { accuracy, n_eval, .. } = r {
            s.eval_accuracy = *accuracy;
            s.n_eval = *n_eval;
        }
    }
    let global_accuracy = stats.iter().map(|s| s.eval_accuracy).sum::<f64>() / stats.len() as f64;
    Ok((
        new_global,
        RoundReport {
            round,
            per_client: stats,
            global_accuracy,
            aggregate_time_secs,
        },
    ))
}

/// Outcome of a full federated run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub rounds: Vec<RoundReport>,
    pub final_weights: FlatWeights,
    pub audit: Vec<AuditEntry>,
}

impl Experiment {
    pub fn final_accuracy(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.global_accuracy)
    }
}

/// Initial global model for a plan: Kaiming-uniform from the plan seed.
pub fn initial_weights(input_dim: usize, seed: u64) -> FlatWeights {
    FlatWeights::flatten(&MlpModel::init(input_dim, derive_seed(seed, 0, 0)))
}

/// Builds one agent per configured client from its assigned shard.
pub fn build_agents(plan: &FlPlan, shards: &BTreeMap<u32, Samples>) -> Result<Vec<ClientAgent>, FedError> {
    plan.validate()?;
    let agents = plan
        .clients
        .iter()
        .map(|c| {
            let shard = shards.get(&c.shard_id).ok_or(FedError::MissingShard(c.shard_id))?;
            ClientAgent::new(c.clone(), shard, plan.eval_split, plan.batch_size, plan.seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dim = agents[0].input_dim();
    if let Some(a) = agents.iter().find(|a| a.input_dim() != dim) {
        return Err(FedError::ShapeMismatch {
            expected: dim,
            got: a.input_dim(),
        });
    }
    Ok(agents)
}

/// Runs every round of `plan` over `transport`, threading the global model.
pub fn drive(plan: &FlPlan, input_dim: usize, transport: &mut dyn Transport) -> Result<Experiment, FedError> {
    let audit = AuditLog::default();
    let mut global = initial_weights(input_dim, plan.seed);
    let mut rounds = Vec::with_capacity(plan.rounds);
    for round in 1..=plan.rounds {
        let (next, report) = run_round(transport, &audit, &global, plan, round)?;
        log::info!("round {round}: global accuracy {:.4}", report.global_accuracy);
        global = next;
        rounds.push(report);
    }
    Ok(Experiment {
        rounds,
        final_weights: global,
        audit: audit.entries(),
    })
}

/// In-process simulation: every agent trains on its own thread each round.
pub fn run_experiment(plan: &FlPlan, shards: &BTreeMap<u32, Samples>) -> Result<Experiment, FedError> {
    let agents = build_agents(plan, shards)?;
    let dim = agents[0].input_dim();
    drive(plan, dim, &mut InProcess::new(agents))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub eval_split: f64,
    pub seed: u64,
}

impl Default for CentralConfig {
    fn default() -> Self {
        CentralConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 32,
            eval_split: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CentralOutcome {
    pub weights: FlatWeights,
    pub standardizer: Standardizer,
    pub history: Vec<EpochStats>,
    pub eval_accuracy: f64,
    pub n_train: usize,
    pub n_eval: usize,
    pub train_time_secs: f64,
}

/// Pools the shards and trains one model the way a single client would in
/// a one-round federation, so the two are directly comparable.
pub fn centralized_train(pool: &[&Samples], config: &CentralConfig) -> Result<CentralOutcome, FedError> {
    let first = pool.first().ok_or_else(|| FedError::InvalidPlan("empty pool".into()))?;
    let mut data = Samples::new(first.dim());
    for s in pool {
        if s.dim() != first.dim() {
            return Err(FedError::ShapeMismatch {
                expected: first.dim(),
                got: s.dim(),
            });
        }
        data.extend(s);
    }
    let plan = FlPlan {
        rounds: 1,
        clients: vec![ClientConfig {
            client_id: 1,
            learning_rate: config.learning_rate,
            optimizer: config.optimizer,
            epochs: config.epochs,
            shard_id: 1,
        }],
        aggregation: Aggregation::Uniform,
        eval_split: config.eval_split,
        batch_size: config.batch_size,
        seed: config.seed,
    };
    plan.validate()?;
    let agent = ClientAgent::new(plan.clients[0].clone(), &data, plan.eval_split, plan.batch_size, plan.seed)?;
    let start = initial_weights(data.dim(), plan.seed);
    let started = Instant::now();
    let (weights, history) = agent.train_with_history(&start, 1)?;
    let train_time_secs = started.elapsed().as_secs_f64();
    Ok(CentralOutcome {
        eval_accuracy: agent.evaluate(&weights)?,
        standardizer: agent.standardizer().clone(),
        n_train: agent.n_train(),
        n_eval: agent.n_eval(),
        weights,
        history,
        train_time_secs,
    })
}
