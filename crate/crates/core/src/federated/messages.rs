use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::neuralnet::FlatWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
    Done,
}

/// Scalar training metrics a client reports alongside its weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub n_train: u64,
    pub final_loss: f64,
    pub epochs_run: usize,
    /// The client's own trained model on its held-out split.
    pub local_eval_accuracy: f64,
    pub train_time_secs: f64,
}

/// Everything that crosses the client/coordinator boundary. Weights travel as
/// base64 of the binary weights encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Broadcast {
        round: usize,
        phase: Phase,
        #[serde(with = "b64")]
        weights: FlatWeights,
    },
    Update {
        client_id: u32,
        round: usize,
        #[serde(with = "b64")]
        weights: FlatWeights,
        metrics: UpdateMetrics,
    },
    EvalReport {
        client_id: u32,
        round: usize,
        accuracy: f64,
        n_eval: u64,
    },
    Failure {
        client_id: u32,
        round: usize,
        message: String,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Broadcast { .. } => "broadcast",
            Message::Update { .. } => "update",
            Message::EvalReport { .. } => "eval_report",
            Message::Failure { .. } => "failure",
        }
    }

    pub fn client_id(&self) -> Option<u32> {
        match self {
            Message::Broadcast { .. } => None,
            Message::Update { client_id, .. } | Message::EvalReport { client_id, .. } | Message::Failure { client_id, .. } => {
                Some(*client_id)
            }
        }
    }
}

mod b64 {
    use super::*;

    pub fn serialize<S: Serializer>(w: &FlatWeights, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(w.to_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FlatWeights, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text).map_err(serde::de::Error::custom)?;
        FlatWeights::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}
