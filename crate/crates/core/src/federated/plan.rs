use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FedError;
use crate::neuralnet::OptimizerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub client_id: u32,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub shard_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Uniform,
    SampleWeighted,
}

fn default_eval_split() -> f64 {
    0.1
}

fn default_batch_size() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlPlan {
    pub rounds: usize,
    pub clients: Vec<ClientConfig>,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "default_eval_split")]
    pub eval_split: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl FlPlan {
    pub fn validate(&self) -> Result<(), FedError> {
        let bad = |m: String| Err(FedError::InvalidPlan(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.clients.is_empty() {
            return bad("plan has no clients".into());
        }
        if !(self.eval_split > 0.0 && self.eval_split < 1.0) {
            return bad(format!("eval_split {} outside (0, 1)", self.eval_split));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        let mut ids: Vec<u32> = self.clients.iter().map(|c| c.client_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.clients.len() {
            return bad("duplicate client_id".into());
        }
        for c in &self.clients {
            if !(c.learning_rate > 0.0 && c.learning_rate.is_finite()) {
                return bad(format!("client {}: learning_rate must be > 0", c.client_id));
            }
            if c.epochs == 0 {
                return bad(format!("client {}: epochs must be at least 1", c.client_id));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FedError> {
        let text = std::fs::read_to_string(path).map_err(|e| FedError::Io(path.display().to_string(), e))?;
        let plan: FlPlan =
            serde_json::from_str(&text).map_err(|e| FedError::InvalidPlan(format!("{}: {e}", path.display())))?;
        plan.validate()?;
        Ok(plan)
    }

    /// The seven ML-Agents with their tuned learning rates and optimizers, 10 epochs each.
    pub fn seven_agents(rounds: usize) -> Self {
        use OptimizerKind::*;
        let table = [
            (0.0003074258400864182, Adam),
            (0.0005025961155459187, RmsProp),
            (0.00010603472201401003, RmsProp),
            (0.00013936442920558617, Adam),
            (0.000587441102433820, RmsProp),
            (0.0006052967400865347, Sgd),
            (0.00012091571705782663, Adam),
        ];
        FlPlan {
            rounds,
            clients: table
                .iter()
                .zip(1u32..)
                .map(|(&(learning_rate, optimizer), id)| ClientConfig {
                    client_id: id,
                    learning_rate,
                    optimizer,
                    epochs: 10,
                    shard_id: id,
                })
                .collect(),
            aggregation: Aggregation::Uniform,
            eval_split: 0.1,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_agent_plan_validates() {
        let p = FlPlan::seven_agents(2);
        p.validate().unwrap();
        assert_eq!(p.clients.len(), 7);
        assert_eq!(p.clients[0].learning_rate, 0.0003074258400864182);
        assert_eq!(p.clients[5].optimizer, OptimizerKind::Sgd);
    }

    #[test]
    fn json_defaults() {
        let p: FlPlan = serde_json::from_str(
            r#"{"rounds": 1, "clients": [{"client_id": 1, "learning_rate": 0.1, "optimizer": "SGD", "epochs": 1, "shard_id": 1}]}"#,
        )
        .unwrap();
        assert_eq!((p.eval_split, p.batch_size, p.aggregation), (0.1, 32, Aggregation::Uniform));
    }

    #[test]
    fn invalid_plans() {
        let mut p = FlPlan::seven_agents(0);
        assert!(p.validate().is_err());
        p.rounds = 1;
        p.eval_split = 1.0;
        assert!(p.validate().is_err());
        p.eval_split = 0.1;
        p.clients[1].client_id = 1;
        assert!(p.validate().is_err());
        p.clients.clear();
        assert!(p.validate().is_err());
    }
}
