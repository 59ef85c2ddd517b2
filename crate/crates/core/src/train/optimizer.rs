use serde::{Deserialize, Serialize};

use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    /// Heavy-ball momentum: `v = momentum * v + g; p -= lr * v`.
    Sgd { lr: f64, momentum: f64 },
    /// Adam with bias-corrected moment estimates.
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr, .. } | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }
}

/// Per-tensor optimizer state, laid out like the trainable tensors.
#[derive(Debug, Clone)]
pub struct Optimizer<T: Real = f32> {
    config: OptimizerConfig,
    steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    /// `sizes` are the lengths of the trainable tensors, in update order.
    pub fn new(config: OptimizerConfig, sizes: &[usize]) -> Self {
        let zeros = || sizes.iter().map(|&n| vec![T::zero(); n]).collect::<Vec<_>>();
        let second = match config {
            OptimizerConfig::Adam { .. } => zeros(),
            OptimizerConfig::Sgd { .. } => Vec::new(),
        };
        Self {
            config,
            steps: 0,
            first: zeros(),
            second,
        }
    }

    pub fn config(&self) -> OptimizerConfig {
        self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. `params` and `grads` must match the sizes given
    /// to [`Optimizer::new`].
    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &[Vec<T>]) {
        assert_eq!(params.len(), self.first.len(), "optimizer: tensor count");
        assert_eq!(grads.len(), self.first.len(), "optimizer: gradient count");
        self.steps += 1;
        match self.config {
            OptimizerConfig::Sgd { lr, momentum } => {
                let (lr, mu) = (T::from_f64_lossy(lr), T::from_f64_lossy(momentum));
                for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.first) {
                    assert_eq!(p.len(), g.len(), "optimizer: tensor size");
                    for ((p, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                        *v = mu * *v + g;
                        *p -= lr * *v;
                    }
                }
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = T::from_f64_lossy(1.0 - beta1.powi(t));
                let c2 = T::from_f64_lossy(1.0 - beta2.powi(t));
                let (lr, eps) = (T::from_f64_lossy(lr), T::from_f64_lossy(eps));
                let (b1, b2) = (T::from_f64_lossy(beta1), T::from_f64_lossy(beta2));
                let one = T::one();
                let tensors = params
                    .into_iter()
                    .zip(grads)
                    .zip(self.first.iter_mut().zip(&mut self.second));
                for ((p, g), (m, v)) in tensors {
                    assert_eq!(p.len(), g.len(), "optimizer: tensor size");
                    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
