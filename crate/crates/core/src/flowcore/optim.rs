//! First-order optimizers over the flat parameter vector.

use super::state::ParamGrad;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Adam with decoupled weight decay.
    AdamW,
    /// Plain gradient steps, used by the gradient-path tests.
    Sgd,
}

/// Optimizer state. `descend` minimizes, `ascend` maximizes; decoupled decay
/// always shrinks the parameters toward zero.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn adamw(lr: f64, weight_decay: f64, param_count: usize) -> Self {
        Optimizer {
            kind: OptimizerKind::AdamW,
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            steps: 0,
        }
    }

    pub fn sgd(lr: f64, param_count: usize) -> Self {
        Optimizer {
            kind: OptimizerKind::Sgd,
            lr,
            weight_decay: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            eps: 0.0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            steps: 0,
        }
    }

    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64, param_count: usize) -> Self {
        match kind {
            OptimizerKind::AdamW => Self::adamw(lr, weight_decay, param_count),
            OptimizerKind::Sgd => {
                let mut o = Self::sgd(lr, param_count);
                o.weight_decay = weight_decay;
                o
            }
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn descend(&mut self, params: &mut [f64], grad: &ParamGrad) {
        self.step(params, grad, 1.0);
    }

    pub fn ascend(&mut self, params: &mut [f64], grad: &ParamGrad) {
        self.step(params, grad, -1.0);
    }

    fn step(&mut self, params: &mut [f64], grad: &ParamGrad, sign: f64) {
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(&grad.values) {
                    *p -= self.lr * (sign * g + self.weight_decay * *p);
                }
            }
            OptimizerKind::AdamW => {
                self.steps += 1;
                let b1t = 1.0 - self.beta1.powi(self.steps as i32);
                let b2t = 1.0 - self.beta2.powi(self.steps as i32);
                for i in 0..params.len() {
                    let g = sign * grad.values[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let mh = self.m[i] / b1t;
                    let vh = self.v[i] / b2t;
                    params[i] -=
                        self.lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * params[i]);
                }
            }
        }
    }
}
