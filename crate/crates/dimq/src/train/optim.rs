//! Gradient-step rules over flat parameter arrays.

use crate::config::{Optimizer, TrainConfig};

/// Optimizer state sized to one parameter vector.
#[derive(Debug, Clone)]
pub struct Optim {
    kind: Optimizer,
    learning_rate: f64,
    beta1: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u64,
}

impl Optim {
    pub fn new(cfg: &TrainConfig, num_params: usize) -> Optim {
        Optim {
            kind: cfg.optimizer,
            learning_rate: cfg.learning_rate,
            beta1: cfg.momentum,
            first: vec![0.0; num_params],
            second: match cfg.optimizer {
                Optimizer::Sgd => Vec::new(),
                Optimizer::Adam => vec![0.0; num_params],
            },
            t: 0,
        }
    }

    /// Applies one update with `grad` pre-scaled by `scale` (1/batch).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], scale: f64) {
        match self.kind {
            Optimizer::Sgd => {
                for ((m, &g), p) in self.first.iter_mut().zip(grad).zip(params.iter_mut()) {
                    *m = self.beta1 * *m + g * scale;
                    *p -= self.learning_rate * *m;
                }
            }
            Optimizer::Adam => {
                self.t += 1;
                let beta2: f64 = 0.999;
                let bias1 = 1.0 - self.beta1.powi(self.t as i32);
                let bias2 = 1.0 - beta2.powi(self.t as i32);
                for (((m, v), &g), p) in self
                    .first
                    .iter_mut()
                    .zip(self.second.iter_mut())
                    .zip(grad)
                    .zip(params.iter_mut())
                {
                    let g = g * scale;
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let mhat = *m / bias1;
                    let vhat = *v / bias2;
                    *p -= self.learning_rate * mhat / (vhat.sqrt() + 1e-8);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;

    #[test]
    fn sgd_momentum_accumulates() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            momentum: 0.5,
            ..TrainConfig::default()
        };
        let mut o = Optim::new(&cfg, 1);
        let mut p = vec![0.0];
        o.step(&mut p, &[1.0], 1.0);
        assert!((p[0] + 0.1).abs() < 1e-15);
        o.step(&mut p, &[1.0], 1.0);
        // velocity = 0.5*1 + 1 = 1.5
        assert!((p[0] + 0.1 + 0.15).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let cfg = TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 0.001,
            momentum: 0.9,
            ..TrainConfig::default()
        };
        let mut o = Optim::new(&cfg, 1);
        let mut p = vec![0.0];
        o.step(&mut p, &[3.0], 1.0);
        // bias-corrected first step is ~lr regardless of gradient scale
        assert!((p[0] + 0.001).abs() < 1e-6);
    }
}
