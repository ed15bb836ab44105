//! Sparsifying compression of client update deltas.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numkit::ParamVector;
use crate::{Error, Result};

/// `K` stored coordinates of a `dim`-dimensional vector; each stored value is
/// multiplied by `scaling` when densified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDelta {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
    pub scaling: f64,
}

impl SparseDelta {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn densify(&self) -> ParamVector {
        let mut out = alloc::vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v * self.scaling;
        }
        ParamVector::from_vec(out)
    }
}

fn check_k(k: usize, dim: usize) -> Result<()> {
    if k == 0 || k > dim {
        Err(Error::config(
            "compression.k",
            alloc::format!("K = {k} outside [1, {dim}]"),
        ))
    } else {
        Ok(())
    }
}

/// Keeps the `k` largest-magnitude coordinates (ties to the lower index), unscaled.
pub fn top_k(delta: &ParamVector, k: usize) -> Result<SparseDelta> {
    check_k(k, delta.len())?;
    let v = delta.as_slice();
    let mut order: Vec<usize> = (0..v.len()).collect();
    if k < v.len() {
        order.select_nth_unstable_by(k - 1, |&a, &b| {
            libm::fabs(v[b]).total_cmp(&libm::fabs(v[a])).then(a.cmp(&b))
        });
        order.truncate(k);
    }
    order.sort_unstable();
    Ok(SparseDelta {
        values: order.iter().map(|&i| v[i]).collect(),
        indices: order,
        dim: v.len(),
        scaling: 1.0,
    })
}

/// Keeps `k` uniformly chosen coordinates, scaled by `d / k` so the densified
/// output is unbiased.
pub fn rand_k<R: Rng + ?Sized>(delta: &ParamVector, k: usize, rng: &mut R) -> Result<SparseDelta> {
    check_k(k, delta.len())?;
    let mut picked = index::sample(rng, delta.len(), k).into_vec();
    picked.sort_unstable();
    Ok(SparseDelta {
        values: picked.iter().map(|&i| delta[i]).collect(),
        indices: picked,
        dim: delta.len(),
        scaling: delta.len() as f64 / k as f64,
    })
}

/// Compressor with `K` given as a fraction of the model dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Compressor {
    TopK { fraction: f64 },
    RandK { fraction: f64 },
}

impl Compressor {
    pub fn fraction(&self) -> f64 {
        match *self {
            Compressor::TopK { fraction } | Compressor::RandK { fraction } => fraction,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let f = self.fraction();
        if f > 0.0 && f <= 1.0 {
            Ok(())
        } else {
            Err(Error::config(
                alloc::format!("{field}.fraction"),
                "must lie in (0, 1]",
            ))
        }
    }

    /// `K = round(fraction * d)`, at least 1.
    pub fn k_for(&self, dim: usize) -> usize {
        let k = libm::round(self.fraction() * dim as f64) as usize;
        k.clamp(1, dim.max(1))
    }

    pub fn compress<R: Rng + ?Sized>(&self, delta: &ParamVector, rng: &mut R) -> Result<SparseDelta> {
        let k = self.k_for(delta.len());
        match self {
            Compressor::TopK { .. } => top_k(delta, k),
            Compressor::RandK { .. } => rand_k(delta, k, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_picks_max_magnitude() {
        let s = top_k(&ParamVector::from_vec(alloc::vec![0.1, -3.0, 2.0]), 1).unwrap();
        assert_eq!(s.indices, alloc::vec![1]);
        assert_eq!(s.values, alloc::vec![-3.0]);
        assert_eq!(s.scaling, 1.0);
    }

    #[test]
    fn top_k_ties_go_to_lower_index() {
        let s = top_k(&ParamVector::from_vec(alloc::vec![1.0, -1.0, 1.0, 0.5]), 2).unwrap();
        assert_eq!(s.indices, alloc::vec![0, 1]);
    }

    #[test]
    fn full_k_is_identity() {
        let x = ParamVector::from_vec(alloc::vec![0.5, -2.0, 0.0, 7.25]);
        assert_eq!(top_k(&x, 4).unwrap().densify(), x);
        let mut rng = crate::seed::stream(0, &[]);
        assert_eq!(rand_k(&x, 4, &mut rng).unwrap().densify(), x);
    }

    #[test]
    fn k_range_is_checked() {
        let x = ParamVector::zeros(3);
        assert!(top_k(&x, 0).is_err());
        assert!(top_k(&x, 4).is_err());
        assert_eq!(Compressor::TopK { fraction: 0.05 }.k_for(10), 1);
        assert_eq!(Compressor::RandK { fraction: 0.15 }.k_for(100), 15);
    }
}
