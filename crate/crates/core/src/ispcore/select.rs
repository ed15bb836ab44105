use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::estimate::{estimate, ClientState, SubsetLoss};
use super::{IspConfig, LossHistory, Objective};
use crate::sampling::ClientSampler;
use crate::{Error, Executor, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub m: usize,
    pub delta_f: f64,
    pub mean_loss: f64,
}

/// Structured record of one solve event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Candidates in evaluation order.
    pub candidates: Vec<Candidate>,
    /// Count picked before momentum.
    pub inner: usize,
    /// False when no candidate improved and the fallback `M` was used.
    pub feasible: bool,
    pub previous: usize,
    /// Count after momentum, rounding and clamping.
    pub chosen: usize,
}

/// `{1, 1 + w, 1 + 2w, ...}` below `cap`, with `cap` always last.
pub fn candidate_grid(resolution: usize, cap: usize) -> Vec<usize> {
    let step = resolution.max(1);
    let mut grid: Vec<usize> = (1..=cap).step_by(step).collect();
    if grid.last() != Some(&cap) && cap >= 1 {
        grid.push(cap);
    }
    grid
}

pub fn round_half_up(x: f64) -> usize {
    let r = libm::floor(x + 0.5);
    if r <= 0.0 {
        0
    } else {
        r as usize
    }
}

/// `round(beta * inner + (1 - beta) * previous)`, clamped to `[1, num_clients]`.
pub fn momentum(inner: usize, previous: usize, beta: f64, num_clients: usize) -> usize {
    let blended = beta * inner as f64 + (1.0 - beta) * previous as f64;
    round_half_up(blended).clamp(1, num_clients.max(1))
}

/// Feasibility solve: walks the candidate grid and stops at the first `m`
/// with negative expected loss change; falls back to `num_clients` when none
/// improves.
#[allow(clippy::too_many_arguments)]
pub fn isp_select<L: SubsetLoss, X: Executor>(
    states: &[ClientState],
    previous: usize,
    num_clients: usize,
    cfg: &IspConfig,
    sampler: &mut ClientSampler,
    loss: &L,
    history: &LossHistory,
    exec: &X,
) -> Result<SolveReport> {
    let grid = grid_for(states, sampler, cfg)?;
    let mut candidates = Vec::new();
    let mut found = None;
    for m in grid {
        let e = estimate(states, m, cfg.coverage(), sampler, loss, history, exec)?;
        candidates.push(Candidate {
            m,
            delta_f: e.delta_f,
            mean_loss: e.mean_loss,
        });
        if e.delta_f < 0.0 {
            found = Some(m);
            break;
        }
    }
    let inner = found.unwrap_or(num_clients);
    Ok(SolveReport {
        candidates,
        inner,
        feasible: found.is_some(),
        previous,
        chosen: momentum(inner, previous, cfg.momentum, num_clients),
    })
}

/// Relative-improvement solve: evaluates the whole grid and maximizes
/// `(-delta_f(m)) / m^exponent` (ties to the smaller `m`).
#[allow(clippy::too_many_arguments)]
pub fn isp_ri_select<L: SubsetLoss, X: Executor>(
    states: &[ClientState],
    previous: usize,
    num_clients: usize,
    cfg: &IspConfig,
    sampler: &mut ClientSampler,
    loss: &L,
    history: &LossHistory,
    exec: &X,
) -> Result<SolveReport> {
    let exponent = match cfg.objective {
        Objective::RelativeImprovement { exponent } => exponent,
        Objective::Feasibility => {
            return Err(Error::config(
                "scheduler.objective",
                "relative-improvement solve needs the relative_improvement objective",
            ))
        }
    };
    let grid = grid_for(states, sampler, cfg)?;
    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize)> = None;
    for m in grid {
        let e = estimate(states, m, cfg.coverage(), sampler, loss, history, exec)?;
        candidates.push(Candidate {
            m,
            delta_f: e.delta_f,
            mean_loss: e.mean_loss,
        });
        let score = -e.delta_f / libm::pow(m as f64, exponent);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, m));
        }
    }
    let (_, inner) = best.expect("grid is nonempty");
    Ok(SolveReport {
        feasible: candidates.iter().any(|c| c.delta_f < 0.0),
        candidates,
        inner,
        previous,
        chosen: momentum(inner, previous, cfg.momentum, num_clients),
    })
}

fn grid_for(states: &[ClientState], sampler: &ClientSampler, cfg: &IspConfig) -> Result<Vec<usize>> {
    if states.is_empty() {
        return Err(Error::config("scheduler", "solve needs at least one client state"));
    }
    let cap = sampler.max_subset(states.len());
    Ok(candidate_grid(cfg.resolution, cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn grid_appends_cap() {
        assert_eq!(candidate_grid(1, 4), vec![1, 2, 3, 4]);
        assert_eq!(candidate_grid(3, 8), vec![1, 4, 7, 8]);
        assert_eq!(candidate_grid(20, 100), vec![1, 21, 41, 61, 81, 100]);
        assert_eq!(candidate_grid(5, 1), vec![1]);
    }

    #[test]
    fn momentum_examples() {
        assert_eq!(momentum(10, 20, 0.5, 100), 15);
        assert_eq!(momentum(7, 40, 1.0, 100), 7);
        // 0.5 * 3 + 0.5 * 4 = 3.5 rounds up.
        assert_eq!(momentum(3, 4, 0.5, 100), 4);
        assert_eq!(momentum(90, 90, 0.5, 50), 50);
    }
}
