use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MlpModel, Mode, NnError, OptimizerState};
use crate::data::Samples;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            patience: 3,
            min_delta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub early_stop: Option<EarlyStop>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            early_stop: Some(EarlyStop::default()),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the per-batch training losses.
    pub loss: f64,
    /// Eval-mode accuracy over the full training set after the epoch.
    pub accuracy: f64,
}

/// Eval-mode accuracy of `model` on already-standardized rows; 0 for an empty set.
pub fn accuracy(model: &MlpModel, data: &Samples) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .rows()
        .filter(|(x, l)| u8::from(model.malignant_prob(x) >= 0.5) == *l)
        .count();
    hits as f64 / data.len() as f64
}

/// Mini-batch training. Rows are reshuffled every epoch; the final short batch
/// is kept. The same seed reproduces the history bit for bit.
pub fn train(
    model: &mut MlpModel,
    data: &Samples,
    config: &TrainConfig,
    opt: &mut OptimizerState,
) -> Result<Vec<EpochStats>, NnError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NnError::EmptyData);
    }
    if data.dim() != model.input_dim() {
        return Err(NnError::ShapeMismatch {
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size * d);
    let mut labels = Vec::with_capacity(config.batch_size);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            labels.clear();
            for &i in chunk {
                batch.extend_from_slice(data.row(i));
                labels.push(data.label(i));
            }
            let mode = Mode::Train { mask_seed: rng.gen() };
            let (loss, grads) = model.loss_and_grads(&batch, &labels, mode)?;
            opt.step(model.params_mut(), &grads);
            loss_sum += loss;
            batches += 1;
        }
        let acc = accuracy(model, data);
        history.push(EpochStats {
            epoch,
            loss: loss_sum / batches as f64,
            accuracy: acc,
        });
        if let Some(es) = config.early_stop {
            if acc - best < es.min_delta {
                stale += 1;
                if stale >= es.patience {
                    break;
                }
            } else {
                stale = 0;
            }
            best = best.max(acc);
        }
    }
    Ok(history)
}
