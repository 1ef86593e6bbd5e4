//! Saved detectors: one JSON document per model, carrying its own
//! preprocessing so a served model never depends on server-side state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::EvalMetrics;
use crate::classical::{Classifier, ForestModel, KnnModel, TreeModel};
use crate::data::Standardizer;
use crate::neuralnet::{FlatWeights, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Knn,
    Dt,
    Rf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Knn => "knn",
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mlp" => Some(ModelKind::Mlp),
            "knn" => Some(ModelKind::Knn),
            "dt" => Some(ModelKind::Dt),
            "rf" => Some(ModelKind::Rf),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Mlp {
        weights: FlatWeights,
        standardizer: Standardizer,
    },
    Knn(KnnModel),
    Dt(TreeModel),
    Rf(ForestModel),
}

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("model is {found}, declared {declared}")]
    KindMismatch { declared: &'static str, found: &'static str },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// MLP plus the z-score statistics its inputs were trained with.
#[derive(Debug, Clone)]
pub struct MlpClassifier {
    pub model: MlpModel,
    pub standardizer: Standardizer,
}

impl Classifier for MlpClassifier {
    fn n_features(&self) -> usize {
        self.model.input_dim()
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; x.len()];
        self.standardizer.transform_row(x, &mut z);
        self.model.malignant_prob(&z)
    }
}

pub type Predictor = Box<dyn Classifier + Send + Sync>;

impl SavedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SavedModel::Mlp { .. } => ModelKind::Mlp,
            SavedModel::Knn(_) => ModelKind::Knn,
            SavedModel::Dt(_) => ModelKind::Dt,
            SavedModel::Rf(_) => ModelKind::Rf,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("model serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        serde_json::from_slice(bytes).map_err(|e| ArtifactError::Corrupt(e.to_string()))
    }

    /// Parses and checks bytes that claim to be a model of `kind`.
    pub fn from_bytes_as(kind: ModelKind, bytes: &[u8]) -> Result<Self, ArtifactError> {
        let m = Self::from_bytes(bytes)?;
        if m.kind() != kind {
            return Err(ArtifactError::KindMismatch {
                declared: kind.as_str(),
                found: m.kind().as_str(),
            });
        }
        m.predictor()?;
        Ok(m)
    }

    pub fn predictor(&self) -> Result<Predictor, ArtifactError> {
        Ok(match self {
            SavedModel::Mlp { weights, standardizer } => {
                let model = weights.unflatten().map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
                if standardizer.dim() != model.input_dim() {
                    return Err(ArtifactError::Corrupt(format!(
                        "standardizer width {} for a {}-input network",
                        standardizer.dim(),
                        model.input_dim()
                    )));
                }
                Box::new(MlpClassifier {
                    model,
                    standardizer: standardizer.clone(),
                })
            }
            SavedModel::Knn(m) => Box::new(m.clone()),
            SavedModel::Dt(m) => Box::new(m.clone()),
            SavedModel::Rf(m) => Box::new(m.clone()),
        })
    }
}

/// A model file as written by `slicefed train` and `slicefed federate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_hash: String,
    pub model: SavedModel,
    #[serde(default)]
    pub metrics: Option<EvalMetrics>,
}

impl ModelArtifact {
    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        let text = serde_json::to_string_pretty(self).expect("artifact serializes");
        std::fs::write(path, text).map_err(|e| ArtifactError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        let text = std::fs::read_to_string(path).map_err(|e| ArtifactError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let a: ModelArtifact = serde_json::from_str(text).map_err(|e| ArtifactError::Corrupt(e.to_string()))?;
        a.model.predictor()?;
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{dt_fit, TreeConfig};
    use crate::data::Samples;

    #[test]
    fn zero_mlp_scores_half() {
        let saved = SavedModel::Mlp {
            weights: FlatWeights::flatten(&MlpModel::zeros(78)),
            standardizer: Standardizer::identity(78),
        };
        let p = saved.predictor().unwrap();
        assert_eq!(p.predict(&[1.0; 78]).unwrap(), (1, 0.5));
        assert!(p.score(&[1.0; 77]).is_err());
    }

    #[test]
    fn bytes_round_trip_and_kind_check() {
        let s = Samples::from_rows(1, &[vec![0.0], vec![1.0]], &[0, 1]);
        let saved = SavedModel::Dt(dt_fit(&s, TreeConfig::default()).unwrap());
        let b = saved.to_bytes();
        assert_eq!(SavedModel::from_bytes_as(ModelKind::Dt, &b).unwrap(), saved);
        assert!(matches!(
            SavedModel::from_bytes_as(ModelKind::Knn, &b),
            Err(ArtifactError::KindMismatch { .. })
        ));
        assert!(SavedModel::from_bytes(b"{}").is_err());
    }

    #[test]
    fn standardizer_width_checked() {
        let saved = SavedModel::Mlp {
            weights: FlatWeights::flatten(&MlpModel::zeros(4)),
            standardizer: Standardizer::identity(3),
        };
        assert!(saved.predictor().is_err());
    }
}
