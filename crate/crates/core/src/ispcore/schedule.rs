use serde::{Deserialize, Serialize};

use super::estimate::{ClientState, SubsetLoss};
use super::select::{isp_ri_select, isp_select, SolveReport};
use super::{IspConfig, LossHistory, Objective};
use crate::numkit::ParamVector;
use crate::sampling::ClientSampler;
use crate::{Error, Executor, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerConfig {
    Fixed {
        m: usize,
    },
    /// Moves one client from `start` toward `end` every `step_every` rounds,
    /// then stays at `end`.
    Linear {
        start: usize,
        end: usize,
        step_every: usize,
    },
    Isp(IspConfig),
}

impl SchedulerConfig {
    pub fn validate(&self, prefix: &str, num_clients: usize) -> Result<()> {
        let in_range = |v: usize, name: &str| {
            if v >= 1 && v <= num_clients {
                Ok(())
            } else {
                Err(Error::config(
                    alloc::format!("{prefix}.{name}"),
                    alloc::format!("must lie in [1, {num_clients}]"),
                ))
            }
        };
        match self {
            SchedulerConfig::Fixed { m } => in_range(*m, "m"),
            SchedulerConfig::Linear {
                start,
                end,
                step_every,
            } => {
                in_range(*start, "start")?;
                in_range(*end, "end")?;
                if *step_every == 0 {
                    return Err(Error::config(
                        alloc::format!("{prefix}.step_every"),
                        "must be >= 1",
                    ));
                }
                Ok(())
            }
            SchedulerConfig::Isp(cfg) => cfg.validate(prefix, num_clients),
        }
    }
}

/// What the round loop has to do to obtain `m_{tau+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plan {
    Keep(usize),
    /// Run an intermediate round with this many clients, then call
    /// [`Scheduler::solve`].
    Solve { intermediate_size: usize },
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    num_clients: usize,
    history: LossHistory,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig, num_clients: usize) -> Result<Self> {
        config.validate("scheduler", num_clients)?;
        let window = match &config {
            SchedulerConfig::Isp(cfg) => cfg.ema_window,
            _ => 1,
        };
        Ok(Scheduler {
            config,
            num_clients,
            history: LossHistory::new(window),
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn history(&self) -> &LossHistory {
        &self.history
    }

    pub fn isp_config(&self) -> Option<&IspConfig> {
        match &self.config {
            SchedulerConfig::Isp(cfg) => Some(cfg),
            _ => None,
        }
    }

    /// Count before round 0.
    pub fn initial(&self) -> usize {
        match &self.config {
            SchedulerConfig::Fixed { m } => *m,
            SchedulerConfig::Linear { start, .. } => *start,
            SchedulerConfig::Isp(cfg) => cfg.initial,
        }
    }

    pub fn is_solve_round(&self, round: usize) -> bool {
        match &self.config {
            SchedulerConfig::Isp(cfg) => round.is_multiple_of(cfg.solve_every),
            _ => false,
        }
    }

    /// Cadence rule: outside solve rounds the count carries over unchanged.
    pub fn plan(&self, round: usize, current: usize) -> Plan {
        match &self.config {
            SchedulerConfig::Fixed { m } => Plan::Keep(*m),
            SchedulerConfig::Linear {
                start,
                end,
                step_every,
            } => {
                let steps = round / step_every;
                let m = if end >= start {
                    (*start + steps).min(*end)
                } else {
                    start.saturating_sub(steps).max(*end)
                };
                Plan::Keep(m.clamp(1, self.num_clients))
            }
            SchedulerConfig::Isp(cfg) => {
                if !round.is_multiple_of(cfg.solve_every) {
                    Plan::Keep(current)
                } else {
                    Plan::Solve {
                        intermediate_size: cfg.intermediate_size_for(self.num_clients),
                    }
                }
            }
        }
    }

    /// Records the current global loss (measured over the intermediate
    /// clients) in the history, then runs the configured solve.
    #[allow(clippy::too_many_arguments)]
    pub fn solve<L: SubsetLoss, X: Executor>(
        &mut self,
        global: &ParamVector,
        current: usize,
        states: &[ClientState],
        sampler: &mut ClientSampler,
        loss: &L,
        exec: &X,
    ) -> Result<SolveReport> {
        let cfg = match &self.config {
            SchedulerConfig::Isp(cfg) => *cfg,
            _ => return Err(Error::config("scheduler", "only the ISP scheduler solves")),
        };
        let mut available: alloc::vec::Vec<usize> = states.iter().map(|s| s.client_id).collect();
        available.sort_unstable();
        let raw = loss.subset_loss(global, &available)?;
        if !raw.is_finite() {
            return Err(Error::NonFinite {
                what: "global loss",
                round: None,
                client: None,
            });
        }
        self.history.ema_smooth(raw);
        match cfg.objective {
            Objective::Feasibility => isp_select(
                states,
                current,
                self.num_clients,
                &cfg,
                sampler,
                loss,
                &self.history,
                exec,
            ),
            Objective::RelativeImprovement { .. } => isp_ri_select(
                states,
                current,
                self.num_clients,
                &cfg,
                sampler,
                loss,
                &self.history,
                exec,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_is_constant() {
        let s = Scheduler::new(SchedulerConfig::Fixed { m: 20 }, 100).unwrap();
        for round in [0, 1, 19, 20, 500] {
            assert_eq!(s.plan(round, 3), Plan::Keep(20));
            assert!(!s.is_solve_round(round));
        }
    }

    #[test]
    fn linear_staircase_then_plateau() {
        let s = Scheduler::new(
            SchedulerConfig::Linear {
                start: 5,
                end: 20,
                step_every: 50,
            },
            100,
        )
        .unwrap();
        assert_eq!(s.plan(0, 0), Plan::Keep(5));
        assert_eq!(s.plan(49, 0), Plan::Keep(5));
        assert_eq!(s.plan(50, 0), Plan::Keep(6));
        assert_eq!(s.plan(749, 0), Plan::Keep(19));
        assert_eq!(s.plan(750, 0), Plan::Keep(20));
        assert_eq!(s.plan(5000, 0), Plan::Keep(20));
    }

    #[test]
    fn isp_cadence() {
        let s = Scheduler::new(SchedulerConfig::Isp(IspConfig::new(20)), 100).unwrap();
        assert_eq!(s.plan(7, 13), Plan::Keep(13));
        assert_eq!(
            s.plan(40, 13),
            Plan::Solve {
                intermediate_size: 100
            }
        );
        assert!(s.is_solve_round(0));
    }

    #[test]
    fn invalid_configs() {
        assert!(Scheduler::new(SchedulerConfig::Fixed { m: 0 }, 10).is_err());
        assert!(Scheduler::new(SchedulerConfig::Fixed { m: 11 }, 10).is_err());
        let mut cfg = IspConfig::new(5);
        cfg.momentum = 0.0;
        assert!(Scheduler::new(SchedulerConfig::Isp(cfg), 10).is_err());
        let mut cfg = IspConfig::new(5);
        cfg.intermediate_size = Some(11);
        assert!(Scheduler::new(SchedulerConfig::Isp(cfg), 10).is_err());
    }
}
