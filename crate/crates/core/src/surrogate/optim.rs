//! First-order optimizers over flat parameter vectors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerConfig {
    /// Heavy-ball gradient descent: `v ← μv − lr·g; w ← w + v`.
    Momentum { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn momentum(lr: f64) -> Self {
        OptimizerConfig::Momentum { lr, momentum: 0.9 }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub(crate) struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, n: usize) -> Self {
        let v = match cfg {
            OptimizerConfig::Momentum { .. } => Vec::new(),
            OptimizerConfig::Adam { .. } => vec![0.0; n],
        };
        Optimizer {
            cfg,
            m: vec![0.0; n],
            v,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        match self.cfg {
            OptimizerConfig::Momentum { lr, momentum } => {
                for ((p, g), m) in params.iter_mut().zip(grads).zip(&mut self.m) {
                    *m = momentum * *m - lr * g;
                    *p += *m;
                }
            }
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                self.t = self.t.saturating_add(1);
                let bc1 = 1.0 - beta1.powi(self.t);
                let bc2 = 1.0 - beta2.powi(self.t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let mh = *m / bc1;
                    let vh = *v / bc2;
                    *p -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimize(cfg: OptimizerConfig) -> f64 {
        // f(x) = (x - 3)^2
        let mut x = vec![0.0];
        let mut opt = Optimizer::new(cfg, 1);
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 3.0)];
            opt.step(&mut x, &g);
        }
        x[0]
    }

    #[test]
    fn both_optimizers_converge_on_a_parabola() {
        assert!((minimize(OptimizerConfig::momentum(0.01)) - 3.0).abs() < 1e-6);
        assert!((minimize(OptimizerConfig::adam(0.05)) - 3.0).abs() < 1e-3);
    }
}
