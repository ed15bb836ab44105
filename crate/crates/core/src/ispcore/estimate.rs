use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::LossHistory;
use crate::numkit::{Batch, ClientData, ModelSpec, ParamVector};
use crate::orchestrator::aggregate;
use crate::sampling::ClientSampler;
use crate::{Error, Executor, Result};

/// One client's parameters after the intermediate round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub client_id: usize,
    pub params: ParamVector,
    pub weight: f64,
}

/// The loss used to score a candidate global model.
pub trait SubsetLoss: Sync {
    /// Loss of `params` as measured for the clients in `subset`.
    fn subset_loss(&self, params: &ParamVector, subset: &[usize]) -> Result<f64>;
}

/// Client-side evaluation: `sum_i w_i f_i(x) / sum_i w_i` over the subset,
/// each `f_i` being the mean loss on client i's training split.
///
/// Loss queries carry no model payload and are not charged to the ledger.
#[derive(Debug, Clone, Copy)]
pub struct ClientLoss<'a> {
    pub model: ModelSpec,
    pub clients: &'a [ClientData],
}

impl SubsetLoss for ClientLoss<'_> {
    fn subset_loss(&self, params: &ParamVector, subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return Err(Error::config("estimate", "empty subset without a surrogate"));
        }
        let mut weighted = 0.0;
        let mut total = 0.0;
        for &id in subset {
            let client = self
                .clients
                .get(id)
                .ok_or_else(|| Error::config("estimate", "unknown client id"))?;
            weighted += client.weight * self.model.loss(params, &client.train)?;
            total += client.weight;
        }
        Ok(weighted / total)
    }
}

/// Server-held proxy loss; ignores the subset.
#[derive(Debug, Clone)]
pub struct SurrogateLoss {
    pub model: ModelSpec,
    pub holdout: Batch,
}

impl SubsetLoss for SurrogateLoss {
    fn subset_loss(&self, params: &ParamVector, _subset: &[usize]) -> Result<f64> {
        self.model.loss(params, &self.holdout)
    }
}

impl<T: SubsetLoss + ?Sized + Sync> SubsetLoss for &T {
    fn subset_loss(&self, params: &ParamVector, subset: &[usize]) -> Result<f64> {
        (**self).subset_loss(params, subset)
    }
}

/// How subsets are drawn for a candidate `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// `N` independent draws from the sampling strategy.
    Sampled(usize),
    /// Every size-`m` subset of the available clients, once each.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Mean loss of the aggregated candidates.
    pub mean_loss: f64,
    /// `mean_loss` after exponential smoothing against the history.
    pub smoothed: f64,
    /// `smoothed - baseline`; negative means expected improvement.
    pub delta_f: f64,
}

/// Expected next-round loss change for `m` participants, estimated from the
/// intermediate-round client states.
pub fn expect_estim<L, X>(
    states: &[ClientState],
    m: usize,
    coverage: Coverage,
    sampler: &mut ClientSampler,
    loss: &L,
    history: &LossHistory,
    exec: &X,
) -> Result<f64>
where
    L: SubsetLoss,
    X: Executor,
{
    estimate(states, m, coverage, sampler, loss, history, exec).map(|e| e.delta_f)
}

pub(crate) fn estimate<L, X>(
    states: &[ClientState],
    m: usize,
    coverage: Coverage,
    sampler: &mut ClientSampler,
    loss: &L,
    history: &LossHistory,
    exec: &X,
) -> Result<Estimate>
where
    L: SubsetLoss,
    X: Executor,
{
    if states.is_empty() {
        return Err(Error::config("estimate", "no client states"));
    }
    if m == 0 || m > states.len() {
        return Err(Error::config(
            "estimate",
            alloc::format!("m = {m} outside [1, {}]", states.len()),
        ));
    }
    let baseline = history
        .baseline()
        .ok_or_else(|| Error::config("estimate", "loss history has no baseline"))?;
    let pool: Vec<usize> = states.iter().map(|s| s.client_id).collect();
    let slot = slot_table(states);

    let subsets: Vec<Vec<usize>> = if m == pool.len() {
        let mut all = pool.clone();
        all.sort_unstable();
        alloc::vec![all]
    } else {
        match coverage {
            Coverage::Exhaustive => combinations(&pool, m),
            Coverage::Sampled(n) => {
                if n == 0 {
                    return Err(Error::config("scheduler.depth", "must be >= 1"));
                }
                (0..n)
                    .map(|_| sampler.sample_from(m, &pool))
                    .collect::<Result<_>>()?
            }
        }
    };

    let losses = exec.map(subsets.len(), |k| {
        let subset = &subsets[k];
        let candidate = aggregate(subset.iter().map(|id| {
            let s = &states[slot[*id]];
            (s.client_id, &s.params, s.weight)
        }))?;
        loss.subset_loss(&candidate, subset)
    });
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    let mean_loss = sum / subsets.len() as f64;
    if !mean_loss.is_finite() {
        return Err(Error::NonFinite {
            what: "estimated loss",
            round: None,
            client: None,
        });
    }
    let smoothed = history.peek(mean_loss);
    Ok(Estimate {
        mean_loss,
        smoothed,
        delta_f: smoothed - baseline,
    })
}

fn slot_table(states: &[ClientState]) -> Vec<usize> {
    let max_id = states.iter().map(|s| s.client_id).max().unwrap_or(0);
    let mut slot = alloc::vec![usize::MAX; max_id + 1];
    for (i, s) in states.iter().enumerate() {
        slot[s.client_id] = i;
    }
    slot
}

/// All size-`k` subsets of `pool` (each sorted), in lexicographic order of positions.
pub fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = pool.len();
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut subset: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
        subset.sort_unstable();
        out.push(subset);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
