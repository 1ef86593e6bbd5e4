//! Wire mode: the coordinator listens on HTTP, every client is a separate
//! thread that only talks to it through JSON requests.
//!
//! `GET /fl/status` gives `{round, phase}`, `GET /fl/broadcast` the current
//! broadcast message, and clients answer with `POST /fl/reply`.

use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::client::ClientAgent;
use super::coordinator::{build_agents, drive, AuditLog, Experiment, Transport};
use super::messages::{Message, Phase};
use super::{FedError, FlPlan};
use crate::data::Samples;

const POLL: Duration = Duration::from_millis(5);
const ROUND_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Status {
    round: usize,
    phase: Phase,
}

#[derive(Default)]
struct WireState {
    status: Option<Status>,
    broadcast: Arc<String>,
    replies: BTreeMap<u32, Message>,
}

struct Shared {
    expected: HashSet<u32>,
    state: Mutex<WireState>,
    arrived: Condvar,
    audit: AuditLog,
}

async fn status(State(s): State<Arc<Shared>>) -> Result<Json<Status>, StatusCode> {
    let st = s.state.lock().expect("wire lock").status;
    st.map(Json).ok_or(StatusCode::NO_CONTENT)
}

async fn broadcast(State(s): State<Arc<Shared>>) -> Result<String, StatusCode> {
    let st = s.state.lock().expect("wire lock");
    match st.status {
        Some(_) => Ok(st.broadcast.as_ref().clone()),
        None => Err(StatusCode::NO_CONTENT),
    }
}

async fn reply(State(s): State<Arc<Shared>>, body: String) -> StatusCode {
    let value: serde_json::Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(_) => return StatusCode::BAD_REQUEST,
    };
    let round = value.get("round").and_then(|r| r.as_u64()).unwrap_or(0) as usize;
    s.audit.record_json(round, &value, body.len());
    let Ok(msg) = serde_json::from_value::<Message>(value) else {
        return StatusCode::BAD_REQUEST;
    };
    let Some(client_id) = msg.client_id().filter(|id| s.expected.contains(id)) else {
        return StatusCode::FORBIDDEN;
    };
    let mut st = s.state.lock().expect("wire lock");
    if st.status.map(|x| x.round) != Some(round) && !matches!(msg, Message::Failure { .. }) {
        return StatusCode::CONFLICT;
    }
    if st.replies.contains_key(&client_id) {
        return StatusCode::CONFLICT;
    }
    st.replies.insert(client_id, msg);
    s.arrived.notify_all();
    StatusCode::ACCEPTED
}

/// Coordinator side of wire mode; also the [`Transport`] the round driver uses.
pub struct WireCoordinator {
    shared: Arc<Shared>,
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    server: Option<std::thread::JoinHandle<()>>,
}

impl WireCoordinator {
    pub fn start(bind: SocketAddr, client_ids: &[u32]) -> Result<Self, FedError> {
        let shared = Arc::new(Shared {
            expected: client_ids.iter().copied().collect(),
            state: Mutex::new(WireState::default()),
            arrived: Condvar::new(),
            audit: AuditLog::default(),
        });
        let router = Router::new()
            .route("/fl/status", get(status))
            .route("/fl/broadcast", get(broadcast))
            .route("/fl/reply", post(reply))
            .with_state(shared.clone());
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| FedError::Wire(e.to_string()))?;
        let listener = rt
            .block_on(tokio::net::TcpListener::bind(bind))
            .map_err(|e| FedError::Wire(format!("bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| FedError::Wire(e.to_string()))?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let server = std::thread::spawn(move || {
            rt.block_on(async move {
                let serve = axum::serve(listener, router).with_graceful_shutdown(async {
                    let _ = rx.await;
                });
                if let Err(e) = serve.await {
                    log::error!("coordinator server: {e}");
                }
            })
        });
        Ok(WireCoordinator {
            shared,
            addr,
            shutdown: Some(tx),
            server: Some(server),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    fn publish(&self, msg: &Message) -> Status {
        let Message::Broadcast { round, phase, .. } = msg else {
            unreachable!("only broadcasts are published")
        };
        let status = Status {
            round: *round,
            phase: *phase,
        };
        let mut st = self.shared.state.lock().expect("wire lock");
        st.replies.clear();
        st.broadcast = Arc::new(serde_json::to_string(msg).expect("message serializes"));
        st.status = Some(status);
        status
    }

    /// Tells clients to exit.
    pub fn finish(&self, weights: &crate::neuralnet::FlatWeights) {
        self.publish(&Message::Broadcast {
            round: usize::MAX,
            phase: Phase::Done,
            weights: weights.clone(),
        });
    }

    pub fn audit(&self) -> Vec<super::AuditEntry> {
        self.shared.audit.entries()
    }
}

impl Transport for WireCoordinator {
    fn exchange(&mut self, msg: &Message) -> Result<Vec<Message>, FedError> {
        self.publish(msg);
        let deadline = Instant::now() + ROUND_TIMEOUT;
        let mut st = self.shared.state.lock().expect("wire lock");
        loop {
            let failed = st.replies.values().any(|m| matches!(m, Message::Failure { .. }));
            if failed || st.replies.len() == self.shared.expected.len() {
                return Ok(std::mem::take(&mut st.replies).into_values().collect());
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(FedError::Wire("timed out waiting for client replies".into()));
            }
            st = self.shared.arrived.wait_timeout(st, left.min(Duration::from_secs(1))).expect("wire lock").0;
        }
    }
}

impl Drop for WireCoordinator {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.server.take() {
            let _ = h.join();
        }
    }
}

/// Client loop: poll status, answer each new broadcast once, exit on `done`.
pub fn run_client(agent: &ClientAgent, base_url: &str) -> Result<(), FedError> {
    let http = ureq::Agent::new_with_defaults();
    let wire = |e: ureq::Error| FedError::Wire(e.to_string());
    let mut last: Option<Status> = None;
    loop {
        let mut resp = http.get(&format!("{base_url}/fl/status")).call().map_err(wire)?;
        if resp.status() == 204 {
            std::thread::sleep(POLL);
            continue;
        }
        let status: Status = resp.body_mut().read_json().map_err(wire)?;
        if last == Some(status) {
            std::thread::sleep(POLL);
            continue;
        }
        if status.phase == Phase::Done {
            return Ok(());
        }
        let text = http
            .get(&format!("{base_url}/fl/broadcast"))
            .call()
            .map_err(wire)?
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_string()
            .map_err(wire)?;
        let msg: Message = serde_json::from_str(&text).map_err(|e| FedError::Wire(e.to_string()))?;
        let Message::Broadcast { round, phase, .. } = &msg else {
            return Err(FedError::Wire(format!("expected a broadcast, got {}", msg.kind())));
        };
        last = Some(Status {
            round: *round,
            phase: *phase,
        });
        let answer = serde_json::to_string(&agent.handle(&msg)).expect("message serializes");
        http.post(&format!("{base_url}/fl/reply"))
            .header("content-type", "application/json")
            .send(answer)
            .map_err(wire)?;
    }
}

/// Same experiment as the in-process simulation, but every payload crosses
/// a real HTTP boundary. The returned audit is the coordinator's record of
/// the raw request bodies it received.
pub fn run_experiment_wire(plan: &FlPlan, shards: &BTreeMap<u32, Samples>, bind: SocketAddr) -> Result<Experiment, FedError> {
    let agents = build_agents(plan, shards)?;
    let ids: Vec<u32> = agents.iter().map(ClientAgent::id).collect();
    let dim = agents[0].input_dim();
    let mut coordinator = WireCoordinator::start(bind, &ids)?;
    let url = coordinator.url();
    let result = std::thread::scope(|s| {
        let clients: Vec<_> = agents.iter().map(|a| s.spawn(|| run_client(a, &url))).collect();
        let result = drive(plan, dim, &mut coordinator);
        let last = match &result {
            Ok(e) => e.final_weights.clone(),
            Err(_) => super::initial_weights(dim, plan.seed),
        };
        coordinator.finish(&last);
        for c in clients {
            if let Ok(Err(e)) = c.join() {
                log::warn!("wire client: {e}");
            }
        }
        result
    });
    let mut exp = result?;
    exp.audit = coordinator.audit();
    Ok(exp)
}
