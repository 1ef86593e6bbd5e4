//! JSON over HTTP/1.1 front end for [`Service`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ActiveInfo, LatencySnapshot, ModelRecord, ModelSummary, PredictionResponse, Service, ServiceError, VersionSel};
use crate::analytics::EvalMetrics;
use crate::artifact::ModelKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictRequest {
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PutModelRequest {
    pub kind: ModelKind,
    pub weights_b64: String,
    pub schema_hash: String,
    #[serde(default)]
    pub metrics: Option<EvalMetrics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PutModelResponse {
    pub model_id: String,
    pub version: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub schema_hash: String,
    pub active: Option<ActiveInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

struct ApiError(StatusCode, &'static str, String);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (code, tag) = match &e {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::NoActiveModel => (StatusCode::CONFLICT, "no_active_model"),
            ServiceError::CorruptWeights(_) => (StatusCode::UNPROCESSABLE_ENTITY, "corrupt_weights"),
            ServiceError::SchemaMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "schema_mismatch"),
            ServiceError::BadDimension { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "bad_dimension"),
            ServiceError::NonFiniteFeature(_) => (StatusCode::UNPROCESSABLE_ENTITY, "non_finite_feature"),
            ServiceError::InvalidModelId(_) => (StatusCode::BAD_REQUEST, "invalid_model_id"),
            ServiceError::Io(..) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        ApiError(code, tag, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.1.to_string(),
            message: self.2,
        };
        (self.0, Json(body)).into_response()
    }
}

type Shared = State<Arc<Service>>;

async fn predict(State(s): Shared, Json(req): Json<PredictRequest>) -> Result<Json<PredictionResponse>, ApiError> {
    Ok(Json(s.predict(&req.features)?))
}

async fn put_model(
    State(s): Shared,
    Path(id): Path<String>,
    Json(req): Json<PutModelRequest>,
) -> Result<(StatusCode, Json<PutModelResponse>), ApiError> {
    let bytes = STANDARD
        .decode(req.weights_b64.as_bytes())
        .map_err(|e| ApiError::from(ServiceError::CorruptWeights(format!("base64: {e}"))))?;
    // registry writes fsync; keep them off the async workers
    let svc = s.clone();
    let model_id = id.clone();
    let version = tokio::task::spawn_blocking(move || {
        svc.registry().put(&model_id, req.kind, bytes, &req.schema_hash, req.metrics)
    })
    .await
    .expect("registry writer panicked")?;
    Ok((StatusCode::CREATED, Json(PutModelResponse { model_id: id, version })))
}

fn version_sel(s: &str) -> Result<VersionSel, ApiError> {
    VersionSel::parse(s).ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, "bad_version", format!("bad version {s:?}")))
}

async fn get_model(State(s): Shared, Path((id, ver)): Path<(String, String)>) -> Result<Json<ModelRecord>, ApiError> {
    let rec = s.registry().get(&id, version_sel(&ver)?)?;
    Ok(Json(rec.as_ref().clone()))
}

async fn list_models(State(s): Shared) -> Json<Vec<ModelSummary>> {
    Json(s.registry().list())
}

async fn activate(State(s): Shared, Path((id, ver)): Path<(String, String)>) -> Result<Json<ActiveInfo>, ApiError> {
    Ok(Json(s.activate(&id, version_sel(&ver)?)?))
}

async fn healthz(State(s): Shared) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        schema_hash: s.schema_hash().to_string(),
        active: s.active(),
    })
}

async fn metrics(State(s): Shared) -> Json<LatencySnapshot> {
    Json(s.latency().snapshot())
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let started = Instant::now();
    let resp = next.run(req).await;
    log::info!(
        target: "slicefed::access",
        "method={method} path={path} status={} micros={}",
        resp.status().as_u16(),
        started.elapsed().as_micros()
    );
    resp
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/predict", post(predict))
        .route("/models", get(list_models))
        .route("/models/{id}", put(put_model))
        .route("/models/{id}/{version}", get(get_model))
        .route("/models/{id}/{version}/activate", post(activate))
        .route("/healthz", get(healthz))
        .route("/metrics", get(metrics))
        .layer(middleware::from_fn(log_request))
        .with_state(service)
}

/// A server running on its own runtime thread. Dropping it shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.thread.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn spawn(service: Arc<Service>, bind: SocketAddr) -> std::io::Result<ServerHandle> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind(bind))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(service);
    let thread = std::thread::spawn(move || {
        rt.block_on(async move {
            let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = rx.await;
            });
            if let Err(e) = serve.await {
                log::error!("prediction server: {e}");
            }
        })
    });
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::SavedModel;
    use crate::data::Standardizer;
    use crate::neuralnet::{FlatWeights, MlpModel};
    use crate::service::Registry;

    fn call(method: &str, url: &str, body: Option<serde_json::Value>) -> (u16, serde_json::Value) {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = match (method, body) {
            ("GET", _) => agent.get(url).call(),
            ("POST", Some(b)) => agent.post(url).send_json(b),
            ("POST", None) => agent.post(url).send_empty(),
            ("PUT", Some(b)) => agent.put(url).send_json(b),
            _ => unreachable!(),
        }
        .unwrap();
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_json().unwrap())
    }

    #[test]
    fn end_to_end() {
        let svc = Arc::new(Service::new(Registry::in_memory(), "h", 0.5));
        let srv = spawn(svc, "127.0.0.1:0".parse().unwrap()).unwrap();
        let u = srv.url();

        let (code, body) = call("POST", &format!("{u}/predict"), Some(serde_json::json!({"features": vec![0.0; 78]})));
        assert_eq!((code, body["error"].as_str()), (409, Some("no_active_model")));

        let bytes = SavedModel::Mlp {
            weights: FlatWeights::flatten(&MlpModel::zeros(78)),
            standardizer: Standardizer::identity(78),
        }
        .to_bytes();
        let put_body = serde_json::json!({"kind": "mlp", "weights_b64": STANDARD.encode(&bytes), "schema_hash": "h"});
        let (code, body) = call("PUT", &format!("{u}/models/zero"), Some(put_body));
        assert_eq!((code, body["version"].as_u64()), (201, Some(1)));

        let (code, body) = call("GET", &format!("{u}/models/zero/latest"), None);
        assert_eq!(code, 200);
        assert_eq!(STANDARD.decode(body["weights_b64"].as_str().unwrap()).unwrap(), bytes);
        assert_eq!(call("GET", &format!("{u}/models/nope/1"), None).0, 404);
        assert_eq!(call("GET", &format!("{u}/models"), None).1[0]["latest"], 1);

        assert_eq!(call("POST", &format!("{u}/models/zero/1/activate"), None).0, 200);
        let (code, body) = call("POST", &format!("{u}/predict"), Some(serde_json::json!({"features": vec![0.0; 78]})));
        assert_eq!(code, 200);
        assert_eq!((body["label"].as_str(), body["score"].as_f64()), (Some("malignant"), Some(0.5)));
        assert_eq!(body["model_version"], 1);

        let (code, body) = call("POST", &format!("{u}/predict"), Some(serde_json::json!({"features": vec![0.0; 77]})));
        assert_eq!((code, body["error"].as_str()), (422, Some("bad_dimension")));

        assert_eq!(call("GET", &format!("{u}/healthz"), None).1["active"]["version"], 1);
        assert_eq!(call("GET", &format!("{u}/metrics"), None).1["count"], 1);
        srv.shutdown();
    }
}
