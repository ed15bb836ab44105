use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Batch, ParamVector};
use crate::{seed, Error, Result};

/// The two supported models. Biases are folded into the parameter vector as
/// weights on a constant input of 1.
///
/// Layouts:
/// - `Softmax`: `classes` rows of `features + 1` weights.
/// - `Mlp`: `hidden` rows of `features + 1` input weights, then `classes`
///   rows of `hidden + 1` output weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    Softmax { classes: usize, features: usize },
    Mlp { classes: usize, features: usize, hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Mean cross-entropy.
    pub loss: f64,
    pub accuracy: f64,
    pub count: usize,
}

impl ModelSpec {
    pub fn classes(&self) -> usize {
        match *self {
            ModelSpec::Softmax { classes, .. } | ModelSpec::Mlp { classes, .. } => classes,
        }
    }

    pub fn features(&self) -> usize {
        match *self {
            ModelSpec::Softmax { features, .. } | ModelSpec::Mlp { features, .. } => features,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ModelSpec::Softmax { classes, features } => classes * (features + 1),
            ModelSpec::Mlp {
                classes,
                features,
                hidden,
            } => hidden * (features + 1) + classes * (hidden + 1),
        }
    }

    /// Initial parameters: zeros for softmax regression, Glorot-uniform
    /// weights with zero biases for the MLP.
    pub fn init(&self, run_seed: u64) -> ParamVector {
        match *self {
            ModelSpec::Softmax { .. } => ParamVector::zeros(self.dim()),
            ModelSpec::Mlp {
                classes,
                features,
                hidden,
            } => {
                let mut rng = seed::stream(run_seed, &[seed::tag::MODEL_INIT]);
                let mut values = Vec::with_capacity(self.dim());
                let a1 = libm::sqrt(6.0 / (features + hidden) as f64);
                for _ in 0..hidden {
                    for _ in 0..features {
                        values.push(rng.random_range(-a1..a1));
                    }
                    values.push(0.0);
                }
                let a2 = libm::sqrt(6.0 / (hidden + classes) as f64);
                for _ in 0..classes {
                    for _ in 0..hidden {
                        values.push(rng.random_range(-a2..a2));
                    }
                    values.push(0.0);
                }
                ParamVector::from_vec(values)
            }
        }
    }

    fn check(&self, params: &ParamVector, batch: &Batch) -> Result<()> {
        params.check_len(self.dim())?;
        if batch.num_features() != self.features() {
            return Err(Error::DimensionMismatch {
                expected: self.features(),
                got: batch.num_features(),
            });
        }
        if batch.is_empty() {
            return Err(Error::config("batch", "empty batch"));
        }
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= self.classes()) {
            return Err(Error::config(
                "batch.labels",
                alloc::format!("label {bad} out of range for {} classes", self.classes()),
            ));
        }
        Ok(())
    }

    /// Mean cross-entropy of `params` over `batch`.
    pub fn loss(&self, params: &ParamVector, batch: &Batch) -> Result<f64> {
        self.check(params, batch)?;
        let (sum, _) = self.pass(params.as_slice(), batch, None);
        Ok(sum / batch.len() as f64)
    }

    pub fn gradient(&self, params: &ParamVector, batch: &Batch) -> Result<ParamVector> {
        self.loss_and_gradient(params, batch).map(|(_, g)| g)
    }

    pub fn loss_and_gradient(
        &self,
        params: &ParamVector,
        batch: &Batch,
    ) -> Result<(f64, ParamVector)> {
        self.check(params, batch)?;
        let mut grad = vec![0.0; self.dim()];
        let (sum, _) = self.pass(params.as_slice(), batch, Some(&mut grad));
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((sum * scale, ParamVector::from_vec(grad)))
    }

    pub fn evaluate(&self, params: &ParamVector, batch: &Batch) -> Result<Evaluation> {
        self.check(params, batch)?;
        let (sum, correct) = self.pass(params.as_slice(), batch, None);
        let n = batch.len() as f64;
        Ok(Evaluation {
            loss: sum / n,
            accuracy: correct as f64 / n,
            count: batch.len(),
        })
    }

    /// One pass over the batch. Returns the summed loss and the number of
    /// correct argmax predictions; accumulates the summed gradient if asked.
    fn pass(&self, params: &[f64], batch: &Batch, mut grad: Option<&mut [f64]>) -> (f64, usize) {
        let classes = self.classes();
        let p = self.features();
        let mut logits = vec![0.0; classes];
        let mut total = 0.0;
        let mut correct = 0;
        match *self {
            ModelSpec::Softmax { .. } => {
                let stride = p + 1;
                for i in 0..batch.len() {
                    let x = batch.row(i);
                    let y = batch.labels()[i];
                    for (c, logit) in logits.iter_mut().enumerate() {
                        let w = &params[c * stride..(c + 1) * stride];
                        *logit = dot(&w[..p], x) + w[p];
                    }
                    let (loss, hit) = softmax_in_place(&mut logits, y);
                    total += loss;
                    correct += hit as usize;
                    if let Some(g) = grad.as_deref_mut() {
                        for (c, &prob) in logits.iter().enumerate() {
                            let delta = prob - if c == y { 1.0 } else { 0.0 };
                            let gw = &mut g[c * stride..(c + 1) * stride];
                            for (gj, xj) in gw[..p].iter_mut().zip(x) {
                                *gj += delta * xj;
                            }
                            gw[p] += delta;
                        }
                    }
                }
            }
            ModelSpec::Mlp { hidden, .. } => {
                let in_stride = p + 1;
                let out_stride = hidden + 1;
                let (w1, w2) = params.split_at(hidden * in_stride);
                let mut h = vec![0.0; hidden];
                let mut dh = vec![0.0; hidden];
                for i in 0..batch.len() {
                    let x = batch.row(i);
                    let y = batch.labels()[i];
                    for (k, hk) in h.iter_mut().enumerate() {
                        let w = &w1[k * in_stride..(k + 1) * in_stride];
                        *hk = libm::tanh(dot(&w[..p], x) + w[p]);
                    }
                    for (c, logit) in logits.iter_mut().enumerate() {
                        let w = &w2[c * out_stride..(c + 1) * out_stride];
                        *logit = dot(&w[..hidden], &h) + w[hidden];
                    }
                    let (loss, hit) = softmax_in_place(&mut logits, y);
                    total += loss;
                    correct += hit as usize;
                    if let Some(g) = grad.as_deref_mut() {
                        let (g1, g2) = g.split_at_mut(hidden * in_stride);
                        dh.iter_mut().for_each(|v| *v = 0.0);
                        for (c, &prob) in logits.iter().enumerate() {
                            let delta = prob - if c == y { 1.0 } else { 0.0 };
                            let w = &w2[c * out_stride..(c + 1) * out_stride];
                            let gw = &mut g2[c * out_stride..(c + 1) * out_stride];
                            for k in 0..hidden {
                                gw[k] += delta * h[k];
                                dh[k] += delta * w[k];
                            }
                            gw[hidden] += delta;
                        }
                        for k in 0..hidden {
                            let pre = dh[k] * (1.0 - h[k] * h[k]);
                            let gw = &mut g1[k * in_stride..(k + 1) * in_stride];
                            for (gj, xj) in gw[..p].iter_mut().zip(x) {
                                *gj += pre * xj;
                            }
                            gw[p] += pre;
                        }
                    }
                }
            }
        }
        (total, correct)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Replaces logits with probabilities. Returns the cross-entropy for `label`
/// and whether the argmax (first on ties) equals `label`.
fn softmax_in_place(logits: &mut [f64], label: usize) -> (f64, bool) {
    let mut argmax = 0;
    for (c, &v) in logits.iter().enumerate() {
        if v > logits[argmax] {
            argmax = c;
        }
    }
    let max = logits[argmax];
    let shifted_label = logits[label] - max;
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    let loss = libm::log(sum) - shifted_label;
    for v in logits.iter_mut() {
        *v /= sum;
    }
    (loss, argmax == label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> ModelSpec {
        ModelSpec::Softmax {
            classes: 2,
            features: 3,
        }
    }

    #[test]
    fn zero_params_give_log_classes() {
        let model = two_class();
        let batch = Batch::new(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0], vec![0, 1], 3).unwrap();
        let loss = model.loss(&ParamVector::zeros(model.dim()), &batch).unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_logit_drives_loss_to_zero() {
        let model = ModelSpec::Softmax {
            classes: 2,
            features: 1,
        };
        let batch = Batch::new(vec![1.0], vec![1], 1).unwrap();
        let mut last = f64::INFINITY;
        for scale in [1.0, 5.0, 20.0, 40.0] {
            let params = ParamVector::from_vec(vec![0.0, 0.0, scale, 0.0]);
            let loss = model.loss(&params, &batch).unwrap();
            assert!(loss < last && loss >= 0.0);
            last = loss;
        }
        assert!(last < 1e-15);
    }

    #[test]
    fn dimension_and_label_errors() {
        let model = two_class();
        let batch = Batch::new(vec![0.0; 3], vec![0], 3).unwrap();
        assert!(matches!(
            model.loss(&ParamVector::zeros(5), &batch),
            Err(Error::DimensionMismatch { expected: 8, got: 5 })
        ));
        let bad = Batch::new(vec![0.0; 3], vec![2], 3).unwrap();
        assert!(matches!(
            model.loss(&ParamVector::zeros(8), &bad),
            Err(Error::Config { .. })
        ));
        let narrow = Batch::new(vec![0.0; 2], vec![0], 2).unwrap();
        assert!(model.loss(&ParamVector::zeros(8), &narrow).is_err());
    }

    #[test]
    fn mlp_dimension() {
        let model = ModelSpec::Mlp {
            classes: 3,
            features: 4,
            hidden: 5,
        };
        assert_eq!(model.dim(), 5 * 5 + 3 * 6);
        let p = model.init(3);
        assert_eq!(p.len(), model.dim());
        assert_eq!(p, model.init(3));
        assert!(p.is_finite());
    }
}
