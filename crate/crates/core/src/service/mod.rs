//! The Security-Agent runtime: a versioned model pool and a prediction
//! endpoint with latency accounting.

pub mod http;
mod latency;
mod registry;

pub use latency::{LatencySnapshot, LatencyWindow};
pub use registry::{ModelRecord, ModelSummary, Registry, VersionSel};

use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifact::{Predictor, SavedModel};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("corrupt weights: {0}")]
    CorruptWeights(String),
    #[error("schema mismatch: serving {expected}, model built for {got}")]
    SchemaMismatch { expected: String, got: String },
    #[error("no active model")]
    NoActiveModel,
    #[error("expected {expected} features, got {got}")]
    BadDimension { expected: usize, got: usize },
    #[error("feature {0} is not finite")]
    NonFiniteFeature(usize),
    #[error("invalid model id {0:?}")]
    InvalidModelId(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Benign,
    Malignant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub label: Verdict,
    pub score: f64,
    pub model_id: String,
    pub model_version: u32,
    pub latency_micros: u64,
}

struct ActiveModel {
    model_id: String,
    version: u32,
    predictor: Predictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveInfo {
    pub model_id: String,
    pub version: u32,
    pub n_features: usize,
}

/// Registry plus the one active model. Activation swaps an `Arc`, so a
/// request holds exactly one model from start to finish.
pub struct Service {
    registry: Registry,
    schema_hash: String,
    threshold: f64,
    active: RwLock<Option<Arc<ActiveModel>>>,
    latency: LatencyWindow,
}

impl Service {
    pub fn new(registry: Registry, schema_hash: impl Into<String>, threshold: f64) -> Self {
        Service {
            registry,
            schema_hash: schema_hash.into(),
            threshold,
            active: RwLock::new(None),
            latency: LatencyWindow::default(),
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn schema_hash(&self) -> &str {
        &self.schema_hash
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn latency(&self) -> &LatencyWindow {
        &self.latency
    }

    pub fn activate(&self, model_id: &str, sel: VersionSel) -> Result<ActiveInfo, ServiceError> {
        let rec = self.registry.get(model_id, sel)?;
        if rec.schema_hash != self.schema_hash {
            return Err(ServiceError::SchemaMismatch {
                expected: self.schema_hash.clone(),
                got: rec.schema_hash.clone(),
            });
        }
        let predictor = SavedModel::from_bytes_as(rec.kind, &rec.weights)
            .and_then(|m| m.predictor())
            .map_err(|e| ServiceError::CorruptWeights(e.to_string()))?;
        let next = Arc::new(ActiveModel {
            model_id: rec.model_id.clone(),
            version: rec.version,
            predictor,
        });
        let info = ActiveInfo {
            model_id: next.model_id.clone(),
            version: next.version,
            n_features: next.predictor.n_features(),
        };
        *self.active.write().expect("active lock") = Some(next);
        log::info!("activated {} v{}", info.model_id, info.version);
        Ok(info)
    }

    pub fn active(&self) -> Option<ActiveInfo> {
        self.active.read().expect("active lock").as_ref().map(|a| ActiveInfo {
            model_id: a.model_id.clone(),
            version: a.version,
            n_features: a.predictor.n_features(),
        })
    }

    /// Classifies one feature vector with the active model. Scores at or
    /// above the threshold are malignant.
    pub fn predict(&self, features: &[f64]) -> Result<PredictionResponse, ServiceError> {
        let started = Instant::now();
        let model = self.active.read().expect("active lock").clone().ok_or(ServiceError::NoActiveModel)?;
        let expected = model.predictor.n_features();
        if features.len() != expected {
            return Err(ServiceError::BadDimension {
                expected,
                got: features.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(ServiceError::NonFiniteFeature(i));
        }
        let score = model.predictor.score_unchecked(features);
        let label = if score >= self.threshold {
            Verdict::Malignant
        } else {
            Verdict::Benign
        };
        let latency_micros = started.elapsed().as_micros() as u64;
        self.latency.record(latency_micros);
        Ok(PredictionResponse {
            label,
            score,
            model_id: model.model_id.clone(),
            model_version: model.version,
            latency_micros,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::ModelKind;
    use crate::data::Standardizer;
    use crate::neuralnet::{FlatWeights, MlpModel};

    fn mlp_bytes(seed: Option<u64>) -> Vec<u8> {
        let m = seed.map_or_else(|| MlpModel::zeros(78), |s| MlpModel::init(78, s));
        SavedModel::Mlp {
            weights: FlatWeights::flatten(&m),
            standardizer: Standardizer::identity(78),
        }
        .to_bytes()
    }

    #[test]
    fn put_get_versions() {
        let r = Registry::in_memory();
        let b = mlp_bytes(None);
        assert_eq!(r.put("m", ModelKind::Mlp, b.clone(), "h", None).unwrap(), 1);
        assert_eq!(r.put("m", ModelKind::Mlp, b.clone(), "h", None).unwrap(), 2);
        assert_eq!(r.get("m", VersionSel::Latest).unwrap().version, 2);
        assert_eq!(r.get("m", VersionSel::Exact(1)).unwrap().weights, b);
        assert!(matches!(r.get("x", VersionSel::Latest), Err(ServiceError::NotFound(_))));
        assert!(matches!(
            r.put("m", ModelKind::Mlp, b"junk".to_vec(), "h", None),
            Err(ServiceError::CorruptWeights(_))
        ));
        assert!(matches!(r.put("a/b", ModelKind::Mlp, b, "h", None), Err(ServiceError::InvalidModelId(_))));
        assert_eq!(r.list()[0].versions, vec![1, 2]);
    }

    #[test]
    fn persistence_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let b = mlp_bytes(Some(1));
        {
            let r = Registry::open(dir.path()).unwrap();
            r.put("m", ModelKind::Mlp, b.clone(), "h", None).unwrap();
            r.put("n", ModelKind::Mlp, b.clone(), "h", None).unwrap();
        }
        let r = Registry::open(dir.path()).unwrap();
        assert_eq!(r.get("m", VersionSel::Latest).unwrap().weights, b);
        assert_eq!(r.put("m", ModelKind::Mlp, b, "h", None).unwrap(), 2);
        assert!(dir.path().join("index.json").exists());
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let b = mlp_bytes(None);
        Registry::open(dir.path()).unwrap().put("m", ModelKind::Mlp, b.clone(), "h", None).unwrap();
        let path = dir.path().join("records.jsonl");
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"model_id\":\"m\",");
        std::fs::write(&path, text).unwrap();
        let r = Registry::open(dir.path()).unwrap();
        assert_eq!(r.put("m", ModelKind::Mlp, b, "h", None).unwrap(), 2);
        assert_eq!(Registry::open(dir.path()).unwrap().list()[0].latest, 2);
    }

    #[test]
    fn activation_and_prediction() {
        let svc = Service::new(Registry::in_memory(), "h", 0.5);
        assert!(matches!(svc.predict(&[0.0; 78]), Err(ServiceError::NoActiveModel)));
        svc.registry().put("m", ModelKind::Mlp, mlp_bytes(None), "h", None).unwrap();
        svc.registry().put("m", ModelKind::Mlp, mlp_bytes(Some(3)), "h", None).unwrap();
        svc.activate("m", VersionSel::Exact(1)).unwrap();
        let r = svc.predict(&[0.0; 78]).unwrap();
        assert_eq!((r.label, r.score, r.model_version), (Verdict::Malignant, 0.5, 1));
        svc.activate("m", VersionSel::Exact(2)).unwrap();
        assert_eq!(svc.predict(&[0.0; 78]).unwrap().model_version, 2);
        assert!(matches!(svc.predict(&[0.0; 77]), Err(ServiceError::BadDimension { expected: 78, got: 77 })));
        let mut bad = [0.0; 78];
        bad[3] = f64::INFINITY;
        assert!(matches!(svc.predict(&bad), Err(ServiceError::NonFiniteFeature(3))));
        assert_eq!(svc.latency().snapshot().count, 2);
    }

    #[test]
    fn schema_mismatch_keeps_serving_model() {
        let svc = Service::new(Registry::in_memory(), "h", 0.5);
        svc.registry().put("m", ModelKind::Mlp, mlp_bytes(None), "h", None).unwrap();
        svc.registry().put("m", ModelKind::Mlp, mlp_bytes(None), "other", None).unwrap();
        svc.activate("m", VersionSel::Exact(1)).unwrap();
        assert!(matches!(
            svc.activate("m", VersionSel::Exact(2)),
            Err(ServiceError::SchemaMismatch { .. })
        ));
        assert_eq!(svc.active().unwrap().version, 1);
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let svc = Service::new(Registry::in_memory(), "h", 0.5);
        svc.registry().put("m", ModelKind::Mlp, mlp_bytes(Some(4)), "h", None).unwrap();
        svc.activate("m", VersionSel::Latest).unwrap();
        let x: Vec<f64> = (0..78).map(|i| i as f64 / 10.0).collect();
        let (a, b) = (svc.predict(&x).unwrap(), svc.predict(&x).unwrap());
        assert_eq!((a.label, a.score), (b.label, b.score));
    }
}
