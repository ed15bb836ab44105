use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr } | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let lr = self.learning_rate();
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::config(
                alloc::format!("{field}.lr"),
                "must be finite and non-negative",
            ));
        }
        if let OptimizerConfig::Adam {
            beta1, beta2, eps, ..
        } = *self
        {
            for (name, v) in [("beta1", beta1), ("beta2", beta2)] {
                if !(0.0..1.0).contains(&v) {
                    return Err(Error::config(
                        alloc::format!("{field}.{name}"),
                        "must lie in [0, 1)",
                    ));
                }
            }
            if eps.is_nan() || eps <= 0.0 {
                return Err(Error::config(alloc::format!("{field}.eps"), "must be > 0"));
            }
        }
        Ok(())
    }
}

/// Per-client optimizer state. Clients are stateless across rounds, so a fresh
/// state is built for every participation.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, dim: usize) -> Self {
        let moments = match config {
            OptimizerConfig::Sgd { .. } => 0,
            OptimizerConfig::Adam { .. } => dim,
        };
        OptimizerState {
            config,
            first: vec![0.0; moments],
            second: vec![0.0; moments],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.first, &self.second)
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        grad.check_len(params.len())?;
        if !grad.is_finite() {
            return Err(Error::NonFinite {
                what: "gradient",
                round: None,
                client: None,
            });
        }
        match self.config {
            OptimizerConfig::Sgd { lr } => {
                for (p, g) in params.as_mut_slice().iter_mut().zip(grad.iter()) {
                    *p -= lr * g;
                }
            }
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                if self.first.len() != params.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.first.len(),
                        got: params.len(),
                    });
                }
                let t = (self.steps + 1) as f64;
                let c1 = 1.0 - libm::pow(beta1, t);
                let c2 = 1.0 - libm::pow(beta2, t);
                for (((p, g), m), v) in params
                    .as_mut_slice()
                    .iter_mut()
                    .zip(grad.iter())
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                }
            }
        }
        self.steps += 1;
        if !params.is_finite() {
            return Err(Error::NonFinite {
                what: "parameters",
                round: None,
                client: None,
            });
        }
        Ok(())
    }
}
