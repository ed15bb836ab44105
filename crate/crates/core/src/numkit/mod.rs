//! Minimal differentiable-model kernel.
//!
//! Two fixed models with closed-form gradients (softmax regression and a
//! one-hidden-layer tanh MLP), SGD/Adam steps and seeded local client training.

mod local;
mod model;
mod optim;

use alloc::vec::Vec;
use core::ops::Index;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use local::{client_update, ClientData, ClientUpdate, LocalTraining, UpdateContext};
pub use model::{Evaluation, ModelSpec};
pub use optim::{OptimizerConfig, OptimizerState};

/// Flat model parameters. The length is fixed by the model for a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        ParamVector(alloc::vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                got: self.len(),
            })
        }
    }

    /// `self - other`, coordinate-wise.
    pub fn difference(&self, other: &ParamVector) -> Result<ParamVector> {
        other.check_len(self.len())?;
        Ok(ParamVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Row-major feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    features: Vec<f64>,
    labels: Vec<usize>,
    num_features: usize,
}

impl Batch {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, num_features: usize) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::config("batch.features", "need at least one feature"));
        }
        if features.len() != labels.len() * num_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * num_features,
                got: features.len(),
            });
        }
        Ok(Batch {
            features,
            labels,
            num_features,
        })
    }

    pub fn empty(num_features: usize) -> Self {
        Batch {
            features: Vec::new(),
            labels: Vec::new(),
            num_features,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Copies the given rows (in the given order) into a new batch.
    pub fn gather(&self, rows: &[usize]) -> Batch {
        let mut features = Vec::with_capacity(rows.len() * self.num_features);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Batch {
            features,
            labels,
            num_features: self.num_features,
        }
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [usize] {
        &mut self.labels
    }

    pub(crate) fn features_mut(&mut self) -> &mut [f64] {
        &mut self.features
    }
}
