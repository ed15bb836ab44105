//! Client-sampling strategies: each returns a duplicate-free subset of the
//! requested size from a pool of client ids.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyKind {
    /// Uniform without replacement.
    Uniform,
    /// Power-of-choice: draw a uniform pool of `pool` candidates and keep the
    /// ones with the highest latest local loss.
    PowD { pool: usize },
    /// Weighted sampling without replacement proportional to `weights`
    /// (indexed by client id).
    Valuation { weights: Vec<f64> },
}

/// Config-file form of [`StrategyKind`]; valuation weights are resolved from
/// the federation at setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum StrategyConfig {
    #[default]
    Uniform,
    PowD {
        d: usize,
    },
    Valuation {
        /// Explicit per-client valuations. Defaults to normalized dataset sizes.
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

impl StrategyConfig {
    pub fn resolve(&self, dataset_weights: &[f64]) -> Result<StrategyKind> {
        let kind = match self {
            StrategyConfig::Uniform => StrategyKind::Uniform,
            StrategyConfig::PowD { d } => StrategyKind::PowD { pool: *d },
            StrategyConfig::Valuation { weights } => StrategyKind::Valuation {
                weights: weights.clone().unwrap_or_else(|| dataset_weights.to_vec()),
            },
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone)]
pub struct ClientSampler {
    kind: StrategyKind,
    num_clients: usize,
    rng: ChaCha8Rng,
    /// Latest reported local loss per client; never-seen clients rank as +inf.
    losses: Vec<f64>,
}

impl ClientSampler {
    pub fn new(kind: StrategyKind, num_clients: usize, stream_seed: u64) -> Result<Self> {
        if num_clients == 0 {
            return Err(Error::config("data.M", "need at least one client"));
        }
        match &kind {
            StrategyKind::Uniform => {}
            StrategyKind::PowD { pool } => {
                if *pool == 0 || *pool > num_clients {
                    return Err(Error::config("strategy.d", "must lie in [1, M]"));
                }
            }
            StrategyKind::Valuation { weights } => {
                if weights.len() != num_clients {
                    return Err(Error::config(
                        "strategy.weights",
                        alloc::format!("expected {num_clients} weights, got {}", weights.len()),
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::config("strategy.weights", "weights must be finite and > 0"));
                }
            }
        }
        Ok(ClientSampler {
            kind,
            num_clients,
            rng: seed::stream(stream_seed, &[seed::tag::SAMPLER]),
            losses: alloc::vec![f64::INFINITY; num_clients],
        })
    }

    pub fn kind(&self) -> &StrategyKind {
        &self.kind
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Largest subset this strategy can return from a pool of `pool_len` clients.
    pub fn max_subset(&self, pool_len: usize) -> usize {
        match self.kind {
            StrategyKind::PowD { pool } => pool.min(pool_len),
            _ => pool_len,
        }
    }

    /// Samples `m` clients from all `M`.
    pub fn sample(&mut self, m: usize) -> Result<Vec<usize>> {
        let all: Vec<usize> = (0..self.num_clients).collect();
        self.sample_from(m, &all)
    }

    /// Samples `m` distinct clients from `pool`; the result is sorted by id.
    pub fn sample_from(&mut self, m: usize, pool: &[usize]) -> Result<Vec<usize>> {
        if m == 0 || m > pool.len() {
            return Err(Error::config(
                "sampling.m",
                alloc::format!("requested {m} clients from a pool of {}", pool.len()),
            ));
        }
        if let Some(&bad) = pool.iter().find(|&&id| id >= self.num_clients) {
            return Err(Error::config(
                "sampling.pool",
                alloc::format!("client id {bad} out of range"),
            ));
        }
        let mut picked: Vec<usize> = match &self.kind {
            StrategyKind::Uniform => index::sample(&mut self.rng, pool.len(), m)
                .into_iter()
                .map(|i| pool[i])
                .collect(),
            StrategyKind::PowD { pool: d } => {
                let d = (*d).min(pool.len());
                if m > d {
                    return Err(Error::config(
                        "strategy.d",
                        alloc::format!("cannot pick {m} clients from a pool of size {d}"),
                    ));
                }
                let mut candidates: Vec<usize> = index::sample(&mut self.rng, pool.len(), d)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect();
                let losses = &self.losses;
                candidates.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
                candidates.truncate(m);
                candidates
            }
            StrategyKind::Valuation { weights } => {
                // Efraimidis-Spirakis: keep the m largest keys u^(1/w).
                let mut keyed: Vec<(f64, usize)> = pool
                    .iter()
                    .map(|&id| {
                        let u: f64 = self.rng.random();
                        (libm::log(u) / weights[id], id)
                    })
                    .collect();
                keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                keyed.into_iter().take(m).map(|(_, id)| id).collect()
            }
        };
        picked.sort_unstable();
        Ok(picked)
    }

    /// Records each reporting client's latest local loss (last write wins).
    pub fn refresh_losses<I>(&mut self, reports: I)
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        for (client, loss) in reports {
            if client < self.num_clients {
                self.losses[client] = loss;
            }
        }
    }
}
