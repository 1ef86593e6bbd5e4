use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "SGD")]
    Sgd,
    Adam,
    #[serde(rename = "RMSprop")]
    RmsProp,
}

impl OptimizerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Some(OptimizerKind::Sgd),
            "adam" => Some(OptimizerKind::Adam),
            "rmsprop" => Some(OptimizerKind::RmsProp),
            _ => None,
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ALPHA: f64 = 0.99;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Adam first moment; empty for the other kinds.
    pub first_moment: Vec<f64>,
    /// Adam second moment, or the RMSprop squared-gradient average.
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (0, 0),
            OptimizerKind::Adam => (n_params, n_params),
            OptimizerKind::RmsProp => (0, n_params),
        };
        OptimizerState {
            kind,
            learning_rate,
            first_moment: vec![0.0; m],
            second_moment: vec![0.0; v],
            step_count: 0,
        }
    }

    /// Applies one update in place. Panics if `grads` and `params` differ in length.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len(), "gradient shape");
        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in params.iter_mut().zip(grads) {
                    *w -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let c1 = 1.0 - BETA1.powi(t);
                let c2 = 1.0 - BETA2.powi(t);
                for (i, (w, &g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = &mut self.first_moment[i];
                    let v = &mut self.second_moment[i];
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                }
            }
            OptimizerKind::RmsProp => {
                for (i, (w, &g)) in params.iter_mut().zip(grads).enumerate() {
                    let v = &mut self.second_moment[i];
                    *v = ALPHA * *v + (1.0 - ALPHA) * g * g;
                    *w -= lr * g / (v.sqrt() + EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [OptimizerKind; 3] = [OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::RmsProp];

    #[test]
    fn sgd_step() {
        let mut s = OptimizerState::new(OptimizerKind::Sgd, 0.1, 1);
        let mut w = [1.0];
        s.step(&mut w, &[1.0]);
        assert!((w[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for kind in KINDS {
            let mut s = OptimizerState::new(kind, 0.01, 3);
            let mut w = [1.0, -2.0, 0.5];
            for _ in 0..5 {
                s.step(&mut w, &[0.0; 3]);
            }
            assert_eq!(w, [1.0, -2.0, 0.5], "{kind:?}");
            assert!(s.first_moment.iter().chain(&s.second_moment).all(|&m| m == 0.0));
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        for kind in KINDS {
            let mut s = OptimizerState::new(kind, 0.0, 2);
            let mut w = [0.3, 0.7];
            s.step(&mut w, &[1.5, -2.0]);
            assert_eq!(w, [0.3, 0.7]);
        }
    }

    #[test]
    fn adam_first_step_closed_form() {
        // m̂ = g, v̂ = g², so Δw = -lr·g/(|g| + ε)
        let mut s = OptimizerState::new(OptimizerKind::Adam, 0.001, 1);
        let mut w = [0.0];
        s.step(&mut w, &[1.0]);
        assert!((w[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_first_step_closed_form() {
        // v = 0.01·g², Δw = -lr·g/(0.1·|g| + ε)
        let mut s = OptimizerState::new(OptimizerKind::RmsProp, 0.01, 1);
        let mut w = [0.0];
        s.step(&mut w, &[2.0]);
        assert!((w[0] + 0.01 * 2.0 / (0.2 + 1e-8)).abs() < 1e-14);
    }

    #[test]
    fn names_round_trip() {
        assert_eq!(serde_json::to_string(&OptimizerKind::RmsProp).unwrap(), "\"RMSprop\"");
        assert_eq!(OptimizerKind::parse("ADAM"), Some(OptimizerKind::Adam));
        assert_eq!(OptimizerKind::parse("adagrad"), None);
    }
}
