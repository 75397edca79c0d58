//! Gradient-ascent parameter updates.
//!
//! RMSProp is the working default; Adam and plain SGD sit behind the
//! optimizer flag. All three ascend the utility (`p += step`), since the
//! objectives are utilities to maximize.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
    Adam,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(OptimizerKind::Sgd),
            "rmsprop" => Some(OptimizerKind::RmsProp),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    step: u64,
    /// Second-moment accumulator (RMSProp, Adam).
    second: Vec<f64>,
    /// First-moment accumulator (Adam only).
    first: Vec<f64>,
    rho: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, n_params: usize) -> Self {
        let needs_second = kind != OptimizerKind::Sgd;
        OptimizerState {
            kind,
            learning_rate,
            step: 0,
            second: if needs_second { vec![0.0; n_params] } else { Vec::new() },
            first: if kind == OptimizerKind::Adam { vec![0.0; n_params] } else { Vec::new() },
            rho: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One ascent step on `params` along `grads`.
    pub fn ascend(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Config(format!(
                "optimizer shape mismatch: {} params vs {} gradients",
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p += self.learning_rate * g;
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, &g), v) in params.iter_mut().zip(grads).zip(&mut self.second) {
                    *v = self.rho * *v + (1.0 - self.rho) * g * g;
                    *p += self.learning_rate * g / (v.sqrt() + self.epsilon);
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - self.beta1.powi(self.step as i32);
                let bc2 = 1.0 - self.beta2.powi(self.step as i32);
                for (((p, &g), m), v) in
                    params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second)
                {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p += self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
                }
            }
        }
        Ok(())
    }
}

/// Scales `grads` down to global L2 norm `max_norm` when they exceed it;
/// returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}
