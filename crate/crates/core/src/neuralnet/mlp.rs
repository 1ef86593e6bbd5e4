use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

pub const INPUT: usize = 78;
pub const HIDDEN: usize = 16;
pub const OUTPUT: usize = 2;
pub const DROPOUT_P: f64 = 0.4;

/// Parameter count for an input width: W1, b1, W2, b2, W3, b3.
pub const fn param_count(input: usize) -> usize {
    HIDDEN * input + HIDDEN + HIDDEN * HIDDEN + HIDDEN + OUTPUT * HIDDEN + OUTPUT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout on the first hidden layer, mask drawn from `mask_seed`.
    Train { mask_seed: u64 },
}

/// Two ReLU hidden layers of 16 units and a 2-way softmax. Parameters live in
/// one flat vector laid out as W1 (row-major, 16×d), b1, W2 (16×16), b2,
/// W3 (2×16), b3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    input: usize,
    params: Vec<f64>,
    pub dropout_p: f64,
}

struct Offsets {
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

fn offsets(d: usize) -> Offsets {
    let b1 = HIDDEN * d;
    let w2 = b1 + HIDDEN;
    let b2 = w2 + HIDDEN * HIDDEN;
    let w3 = b2 + HIDDEN;
    let b3 = w3 + OUTPUT * HIDDEN;
    Offsets { b1, w2, b2, w3, b3 }
}

/// Per-row forward values kept for backpropagation.
struct Trace {
    z1: [f64; HIDDEN],
    keep: [f64; HIDDEN],
    d1: [f64; HIDDEN],
    z2: [f64; HIDDEN],
    a2: [f64; HIDDEN],
    probs: [f64; OUTPUT],
    log_norm: f64,
    logits: [f64; OUTPUT],
}

fn affine<const N: usize>(w: &[f64], b: &[f64], x: &[f64]) -> [f64; N] {
    let mut out = [0.0; N];
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * x.len()..(j + 1) * x.len()];
        *o = b[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    out
}

impl MlpModel {
    pub fn zeros(input: usize) -> Self {
        MlpModel {
            input,
            params: vec![0.0; param_count(input)],
            dropout_p: DROPOUT_P,
        }
    }

    /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
    pub fn init(input: usize, seed: u64) -> Self {
        let mut m = MlpModel::zeros(input);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = offsets(input);
        for (range, fan_in) in [(0..o.b1, input), (o.w2..o.b2, HIDDEN), (o.w3..o.b3, HIDDEN)] {
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in &mut m.params[range] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        m
    }

    pub fn from_params(input: usize, params: Vec<f64>) -> Result<Self, NnError> {
        if params.len() != param_count(input) {
            return Err(NnError::LengthMismatch {
                tag: super::flat::shape_tag(input),
                expected: param_count(input),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NnError::Format("non-finite parameter".into()));
        }
        Ok(MlpModel {
            input,
            params,
            dropout_p: DROPOUT_P,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..offsets(self.input).b1]
    }

    pub fn b1(&self) -> &[f64] {
        let o = offsets(self.input);
        &self.params[o.b1..o.w2]
    }

    pub fn w2(&self) -> &[f64] {
        let o = offsets(self.input);
        &self.params[o.w2..o.b2]
    }

    pub fn b2(&self) -> &[f64] {
        let o = offsets(self.input);
        &self.params[o.b2..o.w3]
    }

    pub fn w3(&self) -> &[f64] {
        let o = offsets(self.input);
        &self.params[o.w3..o.b3]
    }

    pub fn b3(&self) -> &[f64] {
        &self.params[offsets(self.input).b3..]
    }

    /// (rows, cols) of W1, W2, W3.
    pub fn layer_shapes(&self) -> [(usize, usize); 3] {
        [(HIDDEN, self.input), (HIDDEN, HIDDEN), (OUTPUT, HIDDEN)]
    }

    fn check_batch(&self, batch: &[f64]) -> Result<usize, NnError> {
        if self.input == 0 || !batch.len().is_multiple_of(self.input) {
            return Err(NnError::ShapeMismatch {
                expected: self.input,
                got: batch.len(),
            });
        }
        if let Some(i) = batch.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput { row: i / self.input });
        }
        Ok(batch.len() / self.input)
    }

    fn trace(&self, x: &[f64], keep: [f64; HIDDEN]) -> Trace {
        let o = offsets(self.input);
        let p = &self.params;
        let z1: [f64; HIDDEN] = affine(&p[..o.b1], &p[o.b1..o.w2], x);
        let mut d1 = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            d1[j] = z1[j].max(0.0) * keep[j];
        }
        let z2: [f64; HIDDEN] = affine(&p[o.w2..o.b2], &p[o.b2..o.w3], &d1);
        let a2 = z2.map(|z| z.max(0.0));
        let logits: [f64; OUTPUT] = affine(&p[o.w3..o.b3], &p[o.b3..], &a2);
        let m = logits[0].max(logits[1]);
        let e = logits.map(|l| (l - m).exp());
        let s = e[0] + e[1];
        Trace {
            z1,
            keep,
            d1,
            z2,
            a2,
            probs: e.map(|v| v / s),
            log_norm: m + s.ln(),
            logits,
        }
    }

    /// Per-row keep multipliers: 0 for dropped units, 1/(1-p) for survivors.
    fn masks(&self, rows: usize, mode: Mode) -> Vec<[f64; HIDDEN]> {
        match mode {
            Mode::Eval => vec![[1.0; HIDDEN]; rows],
            Mode::Train { mask_seed } => {
                let keep_p = 1.0 - self.dropout_p;
                let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
                (0..rows)
                    .map(|_| std::array::from_fn(|_| if rng.gen_bool(keep_p) { 1.0 / keep_p } else { 0.0 }))
                    .collect()
            }
        }
    }

    /// Class probabilities [benign, malignant] per row.
    pub fn forward(&self, batch: &[f64], mode: Mode) -> Result<Vec<[f64; OUTPUT]>, NnError> {
        let rows = self.check_batch(batch)?;
        let masks = self.masks(rows, mode);
        Ok(batch
            .chunks_exact(self.input)
            .zip(masks)
            .map(|(x, k)| self.trace(x, k).probs)
            .collect())
    }

    /// Eval-mode malignant probability of one row; the caller guarantees width and finiteness.
    pub fn malignant_prob(&self, x: &[f64]) -> f64 {
        self.trace(x, [1.0; HIDDEN]).probs[1]
    }

    /// Mean cross-entropy and its gradient, laid out like `params()`.
    pub fn loss_and_grads(&self, batch: &[f64], labels: &[u8], mode: Mode) -> Result<(f64, Vec<f64>), NnError> {
        let rows = self.check_batch(batch)?;
        if labels.len() != rows {
            return Err(NnError::ShapeMismatch {
                expected: rows,
                got: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(NnError::BadLabel(l));
        }
        let d = self.input;
        let o = offsets(d);
        let p = &self.params;
        let mut g = vec![0.0; p.len()];
        let mut loss = 0.0;
        for ((x, &y), keep) in batch.chunks_exact(d).zip(labels).zip(self.masks(rows, mode)) {
            let t = self.trace(x, keep);
            loss += t.log_norm - t.logits[usize::from(y)];

            let mut dz3 = t.probs;
            dz3[usize::from(y)] -= 1.0;
            let mut da2 = [0.0; HIDDEN];
            for (k, &dz) in dz3.iter().enumerate() {
                g[o.b3 + k] += dz;
                for j in 0..HIDDEN {
                    g[o.w3 + k * HIDDEN + j] += dz * t.a2[j];
                    da2[j] += p[o.w3 + k * HIDDEN + j] * dz;
                }
            }
            let mut dd1 = [0.0; HIDDEN];
            for j in 0..HIDDEN {
                if t.z2[j] <= 0.0 {
                    continue;
                }
                let dz = da2[j];
                g[o.b2 + j] += dz;
                for i in 0..HIDDEN {
                    g[o.w2 + j * HIDDEN + i] += dz * t.d1[i];
                    dd1[i] += p[o.w2 + j * HIDDEN + i] * dz;
                }
            }
            for j in 0..HIDDEN {
                if t.z1[j] <= 0.0 || t.keep[j] == 0.0 {
                    continue;
                }
                let dz = dd1[j] * t.keep[j];
                g[o.b1 + j] += dz;
                for (gw, &xi) in g[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *gw += dz * xi;
                }
            }
        }
        let n = rows as f64;
        g.iter_mut().for_each(|v| *v /= n);
        Ok((loss / n, g))
    }
}
