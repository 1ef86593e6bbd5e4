use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::messages::{Message, Phase, UpdateMetrics};
use super::{ClientConfig, FedError};
use crate::data::{Samples, Standardizer};
use crate::neuralnet::{train, EarlyStop, EpochStats, FlatWeights, MlpModel, OptimizerState, TrainConfig};

/// Independent 64-bit seed for a (purpose, index) pair under a base seed.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b);
    rng.gen()
}

/// Seeded split stratified by label. Each class sends `round(n_c * frac)`
/// rows to the held-out side, never all of them.
pub fn stratified_split(labels: &[u8], frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_eval = ((idx.len() as f64 * frac).round() as usize).min(idx.len().saturating_sub(1));
        eval.extend_from_slice(&idx[..n_eval]);
        train.extend_from_slice(&idx[n_eval..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    (train, eval)
}

/// One ML-Agent. Holds its shard and local statistics; never hands rows out.
#[derive(Debug, Clone)]
pub struct ClientAgent {
    config: ClientConfig,
    batch_size: usize,
    seed: u64,
    standardizer: Standardizer,
    train: Samples,
    eval: Samples,
}

impl ClientAgent {
    /// Splits `shard` 90/10 (per `eval_split`) and standardizes both sides
    /// with statistics of the training side only.
    pub fn new(config: ClientConfig, shard: &Samples, eval_split: f64, batch_size: usize, seed: u64) -> Result<Self, FedError> {
        let (tr, ev) = stratified_split(shard.labels(), eval_split, derive_seed(seed, 1, u64::from(config.client_id)));
        if tr.is_empty() || ev.is_empty() {
            return Err(FedError::ClientFailure {
                client_id: config.client_id,
                message: format!("shard of {} rows is too small to split", shard.len()),
            });
        }
        let raw_train = shard.select(&tr);
        let standardizer = Standardizer::fit(&raw_train);
        Ok(ClientAgent {
            train: standardizer.transform(&raw_train),
            eval: standardizer.transform(&shard.select(&ev)),
            standardizer,
            config,
            batch_size,
            seed,
        })
    }

    pub fn id(&self) -> u32 {
        self.config.client_id
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn input_dim(&self) -> usize {
        self.train.dim()
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    pub fn n_eval(&self) -> usize {
        self.eval.len()
    }

    /// Local training from `global`; the returned weights and history never
    /// include data rows.
    pub fn train_with_history(&self, global: &FlatWeights, round: usize) -> Result<(FlatWeights, Vec<EpochStats>), FedError> {
        let mut model = global.unflatten()?;
        let mut opt = OptimizerState::new(self.config.optimizer, self.config.learning_rate, model.params().len());
        let cfg = TrainConfig {
            epochs: self.config.epochs,
            batch_size: self.batch_size,
            early_stop: Some(EarlyStop::default()),
            seed: derive_seed(self.seed, 2 + u64::from(self.config.client_id), round as u64),
        };
        let history = train(&mut model, &self.train, &cfg, &mut opt)?;
        Ok((FlatWeights::flatten(&model), history))
    }

    pub fn train_round(&self, global: &FlatWeights, round: usize) -> Result<(FlatWeights, UpdateMetrics), FedError> {
        let started = Instant::now();
        let (weights, history) = self.train_with_history(global, round)?;
        let metrics = UpdateMetrics {
            n_train: self.train.len() as u64,
            final_loss: history.last().map_or(f64::NAN, |e| e.loss),
            epochs_run: history.len(),
            local_eval_accuracy: self.evaluate(&weights)?,
            train_time_secs: started.elapsed().as_secs_f64(),
        };
        Ok((weights, metrics))
    }

    /// Accuracy of `weights` on the held-out split.
    pub fn evaluate(&self, weights: &FlatWeights) -> Result<f64, FedError> {
        let model: MlpModel = weights.unflatten()?;
        if model.input_dim() != self.input_dim() {
            return Err(FedError::ShapeMismatch {
                expected: self.input_dim(),
                got: model.input_dim(),
            });
        }
        Ok(crate::neuralnet::accuracy(&model, &self.eval))
    }

    /// Answers one coordinator broadcast.
    pub fn handle(&self, msg: &Message) -> Message {
        let client_id = self.id();
        let (round, result) = match msg {
            Message::Broadcast {
                round,
                phase: Phase::Train,
                weights,
            } => (
                *round,
                self.train_round(weights, *round).map(|(weights, metrics)| Message::Update {
                    client_id,
                    round: *round,
                    weights,
                    metrics,
                }),
            ),
            Message::Broadcast {
                round,
                phase: Phase::Eval,
                weights,
            } => (
                *round,
                self.evaluate(weights).map(|accuracy| Message::EvalReport {
                    client_id,
                    round: *round,
                    accuracy,
                    n_eval: self.eval.len() as u64,
                }),
            ),
            other => (
                0,
                Err(FedError::Wire(format!("client cannot answer a {} message", other.kind()))),
            ),
        };
        result.unwrap_or_else(|e| Message::Failure {
            client_id,
            round,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::OptimizerKind;
    use crate::synth::two_gaussians;

    #[test]
    fn split_is_stratified() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 10 == 0)).collect();
        let (tr, ev) = stratified_split(&labels, 0.1, 4);
        assert_eq!((tr.len(), ev.len()), (900, 100));
        assert_eq!(ev.iter().filter(|&&i| labels[i] == 1).count(), 10);
        let mut all: Vec<usize> = tr.iter().chain(&ev).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn rare_class_keeps_a_training_row() {
        let mut labels = vec![0u8; 100];
        labels[5] = 1;
        let (tr, _) = stratified_split(&labels, 0.9, 1);
        assert!(tr.contains(&5));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    }

    #[test]
    fn handle_answers_each_phase() {
        let data = two_gaussians(200, 4, 1.0, 1);
        let cfg = ClientConfig {
            client_id: 2,
            learning_rate: 1e-2,
            optimizer: OptimizerKind::Adam,
            epochs: 1,
            shard_id: 2,
        };
        let agent = ClientAgent::new(cfg, &data, 0.1, 32, 7).unwrap();
        let w = FlatWeights::flatten(&MlpModel::init(4, 1));
        let up = agent.handle(&Message::Broadcast {
            round: 1,
            phase: Phase::Train,
            weights: w.clone(),
        });
        assert!(matches!(up, Message::Update { client_id: 2, round: 1, .. }));
        let ev = agent.handle(&Message::Broadcast {
            round: 1,
            phase: Phase::Eval,
            weights: w,
        });
        assert!(matches!(ev, Message::EvalReport { n_eval: 20, .. }));
        let bad = agent.handle(&Message::Broadcast {
            round: 1,
            phase: Phase::Train,
            weights: FlatWeights::flatten(&MlpModel::init(5, 1)),
        });
        assert_eq!(bad.kind(), "failure");
    }
}
