//! Participant-count controller.
//!
//! Every `solve_every` rounds the controller collects updates from an
//! intermediate round, estimates for candidate counts `m = 1, 1 + w, ...` the
//! expected change of the global loss when `m` of those updates are
//! aggregated, and picks the next count: the smallest improving `m`
//! (feasibility objective) or the best improvement per client (relative
//! improvement objective), blended with the previous count by momentum.
//! Fixed and linear schedules share the same interface.

mod estimate;
mod history;
mod schedule;
mod select;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use estimate::{
    combinations, expect_estim, ClientLoss, ClientState, Coverage, Estimate, SubsetLoss,
    SurrogateLoss,
};
pub use history::LossHistory;
pub use schedule::{Plan, Scheduler, SchedulerConfig};
pub use select::{
    candidate_grid, isp_ri_select, isp_select, momentum, round_half_up, Candidate, SolveReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Objective {
    /// Smallest `m` whose expected loss change is negative.
    #[default]
    Feasibility,
    /// `argmax_m (-delta_f(m)) / m^exponent` over the full grid.
    RelativeImprovement { exponent: f64 },
}

/// Server-side holdout used instead of client loss queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    #[serde(default = "default_holdout")]
    pub holdout_size: usize,
    /// Probability of relabelling a holdout row uniformly at random.
    #[serde(default)]
    pub label_noise: f64,
    /// Std of Gaussian noise added to holdout features.
    #[serde(default)]
    pub feature_jitter: f64,
}

fn default_holdout() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IspConfig {
    /// Count used before the first solve.
    pub initial: usize,
    /// Solve once every this many rounds.
    #[serde(default = "default_solve_every")]
    pub solve_every: usize,
    /// Monte-Carlo draws per candidate.
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Enumerate every subset instead of sampling (small federations only).
    #[serde(default)]
    pub enumerate_all: bool,
    /// Step between candidate counts.
    #[serde(default = "default_one")]
    pub resolution: usize,
    /// Weight of the freshly solved count against the previous one.
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_ema_window")]
    pub ema_window: usize,
    /// Clients in the intermediate round; all clients when absent.
    #[serde(default)]
    pub intermediate_size: Option<usize>,
    /// Local epochs in the intermediate round; the ordinary budget when absent.
    #[serde(default)]
    pub intermediate_epochs: Option<usize>,
    #[serde(default)]
    pub surrogate: Option<SurrogateConfig>,
    #[serde(default)]
    pub objective: Objective,
}

fn default_solve_every() -> usize {
    20
}

fn default_depth() -> usize {
    10
}

fn default_one() -> usize {
    1
}

fn default_momentum() -> f64 {
    0.5
}

fn default_ema_window() -> usize {
    5
}

impl IspConfig {
    pub fn new(initial: usize) -> Self {
        IspConfig {
            initial,
            solve_every: default_solve_every(),
            depth: default_depth(),
            enumerate_all: false,
            resolution: 1,
            momentum: default_momentum(),
            ema_window: default_ema_window(),
            intermediate_size: None,
            intermediate_epochs: None,
            surrogate: None,
            objective: Objective::Feasibility,
        }
    }

    pub fn coverage(&self) -> Coverage {
        if self.enumerate_all {
            Coverage::Exhaustive
        } else {
            Coverage::Sampled(self.depth)
        }
    }

    pub fn intermediate_size_for(&self, num_clients: usize) -> usize {
        self.intermediate_size.unwrap_or(num_clients)
    }

    pub fn validate(&self, prefix: &str, num_clients: usize) -> Result<()> {
        let field = |name: &str| alloc::format!("{prefix}.{name}");
        let in_range = |v: usize, name: &str| {
            if v >= 1 && v <= num_clients {
                Ok(())
            } else {
                Err(Error::config(field(name), alloc::format!("must lie in [1, {num_clients}]")))
            }
        };
        in_range(self.initial, "initial")?;
        if self.solve_every == 0 {
            return Err(Error::config(field("solve_every"), "must be >= 1"));
        }
        if self.depth == 0 {
            return Err(Error::config(field("depth"), "must be >= 1"));
        }
        if self.resolution == 0 {
            return Err(Error::config(field("resolution"), "must be >= 1"));
        }
        if !(self.momentum > 0.0 && self.momentum <= 1.0) {
            return Err(Error::config(field("momentum"), "must lie in (0, 1]"));
        }
        if self.ema_window == 0 {
            return Err(Error::config(field("ema_window"), "must be >= 1"));
        }
        if let Some(size) = self.intermediate_size {
            in_range(size, "intermediate_size")?;
        }
        if self.intermediate_epochs == Some(0) {
            return Err(Error::config(field("intermediate_epochs"), "must be >= 1"));
        }
        if let Some(s) = &self.surrogate {
            if s.holdout_size == 0 {
                return Err(Error::config(field("surrogate.holdout_size"), "must be >= 1"));
            }
            if !(0.0..=1.0).contains(&s.label_noise) {
                return Err(Error::config(field("surrogate.label_noise"), "must lie in [0, 1]"));
            }
            if !(s.feature_jitter >= 0.0 && s.feature_jitter.is_finite()) {
                return Err(Error::config(field("surrogate.feature_jitter"), "must be >= 0"));
            }
        }
        if let Objective::RelativeImprovement { exponent } = self.objective {
            if !(exponent > 0.0 && exponent.is_finite()) {
                return Err(Error::config(field("objective.exponent"), "must be > 0"));
            }
        }
        Ok(())
    }
}
