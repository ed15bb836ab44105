use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::federation::Federation;
use super::ledger::{CommunicationLedger, CountMode, RoundRecord};
use super::aggregate;
use crate::compress::Compressor;
use crate::ispcore::{ClientLoss, ClientState, Plan, Scheduler, SchedulerConfig, SubsetLoss, SurrogateLoss};
use crate::numkit::{client_update, ClientUpdate, LocalTraining, ParamVector, UpdateContext};
use crate::sampling::{ClientSampler, StrategyConfig};
use crate::datasim::surrogate_holdout;
use crate::{seed, Error, Executor, Result};

/// Everything that defines one simulated run on a federation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub rounds: usize,
    pub local: LocalTraining,
    /// Stop after this many rounds without a new best validation loss.
    pub patience: Option<usize>,
    pub scheduler: SchedulerConfig,
    pub strategy: StrategyConfig,
    pub compression: Option<Compressor>,
    pub seed: u64,
}

/// Timing hook; the default implementation does nothing.
pub trait RunHooks {
    fn round_started(&mut self, _round: usize, _intermediate: bool) {}
    fn round_finished(&mut self, _round: usize, _intermediate: bool) {}
}

impl RunHooks for () {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub initial_params: ParamVector,
    pub final_params: ParamVector,
    pub best_params: ParamVector,
    pub records: Vec<RoundRecord>,
    pub ledger: CommunicationLedger,
    /// Index into `records` of the ordinary round with the lowest validation loss.
    pub best_record: Option<usize>,
    pub stopped_early: bool,
    pub spec: RunSpec,
}

impl RunResult {
    pub fn best(&self) -> Option<&RoundRecord> {
        self.best_record.map(|i| &self.records[i])
    }

    pub fn communications(&self, mode: CountMode) -> usize {
        match mode {
            CountMode::Total => self.ledger.total(),
            CountMode::ToBest => self.best().map_or(0, |r| r.ledger_total),
        }
    }
}

const PHASE_ROUND: u64 = seed::tag::LOCAL_TRAIN;
const PHASE_INTERMEDIATE: u64 = seed::tag::INTERMEDIATE_TRAIN;

enum EstimLoss<'a> {
    Clients(ClientLoss<'a>),
    Surrogate(SurrogateLoss),
}

impl SubsetLoss for EstimLoss<'_> {
    fn subset_loss(&self, params: &ParamVector, subset: &[usize]) -> Result<f64> {
        match self {
            EstimLoss::Clients(l) => l.subset_loss(params, subset),
            EstimLoss::Surrogate(l) => l.subset_loss(params, subset),
        }
    }
}

/// Replaces the transmitted parameters by `global + densify(compress(x_i - global))`.
pub fn apply_compression(
    update: ClientUpdate,
    compressor: &Compressor,
    global: &ParamVector,
    rng_seed: u64,
) -> Result<ClientUpdate> {
    let delta = update.params.difference(global)?;
    let mut rng = seed::stream(rng_seed, &[seed::tag::COMPRESS]);
    let sparse = compressor.compress(&delta, &mut rng)?;
    let mut params = global.clone();
    for (&i, &v) in sparse.indices.iter().zip(&sparse.values) {
        // Unscaled kept coordinates are the client's own values exactly.
        params.as_mut_slice()[i] = if sparse.scaling == 1.0 {
            update.params[i]
        } else {
            global[i] + v * sparse.scaling
        };
    }
    Ok(ClientUpdate { params, ..update })
}

struct Runner<'a, X> {
    fed: &'a Federation,
    spec: &'a RunSpec,
    exec: &'a X,
}

impl<X: Executor> Runner<'_, X> {
    /// Local training on `ids` from `global`, followed by optional compression.
    fn get_updates(
        &self,
        global: &ParamVector,
        ids: &[usize],
        round: usize,
        phase: u64,
        epochs: usize,
    ) -> Result<Vec<ClientUpdate>> {
        let plan = LocalTraining {
            epochs,
            ..self.spec.local
        };
        let ctx = UpdateContext {
            run_seed: self.spec.seed,
            round,
            phase,
        };
        let results = self.exec.map(ids.len(), |k| {
            let client = &self.fed.clients[ids[k]];
            let update = client_update(&self.fed.model, global, client, &plan, ctx)?;
            match &self.spec.compression {
                None => Ok(update),
                Some(c) => {
                    let key = seed::derive(
                        self.spec.seed,
                        &[phase, client.id as u64, round as u64],
                    );
                    apply_compression(update, c, global, key)
                }
            }
        });
        results.into_iter().collect()
    }

    fn aggregate(&self, updates: &[ClientUpdate]) -> Result<ParamVector> {
        aggregate(
            updates
                .iter()
                .map(|u| (u.client_id, &u.params, self.fed.clients[u.client_id].weight)),
        )
    }
}

/// Runs the periodic federated loop for `spec.rounds` rounds (or until the
/// patience runs out).
///
/// Each round: the scheduler defines the participant count (running an
/// intermediate round on solve rounds), the strategy samples that many
/// clients, they train locally from the current global model, and the server
/// aggregates. The ledger charges one exchange per participant, intermediate
/// rounds included.
pub fn run_training<X: Executor, H: RunHooks>(
    fed: &Federation,
    spec: &RunSpec,
    exec: &X,
    hooks: &mut H,
) -> Result<RunResult> {
    let num_clients = fed.num_clients();
    if spec.local.epochs == 0 {
        return Err(Error::config("training.epochs", "must be >= 1"));
    }
    spec.local.optimizer.validate("training.optimizer")?;
    if let Some(c) = &spec.compression {
        c.validate("compression")?;
    }
    let strategy = spec.strategy.resolve(&fed.weights())?;
    let mut sampler = ClientSampler::new(strategy, num_clients, spec.seed)?;
    let mut scheduler = Scheduler::new(spec.scheduler.clone(), num_clients)?;
    let max_subset = sampler.max_subset(num_clients);

    let estim_loss = match scheduler.isp_config().and_then(|c| c.surrogate) {
        Some(s) => EstimLoss::Surrogate(SurrogateLoss {
            model: fed.model,
            holdout: surrogate_holdout(
                &fed.dataset,
                s.holdout_size,
                s.label_noise,
                s.feature_jitter,
                spec.seed,
            ),
        }),
        None => EstimLoss::Clients(ClientLoss {
            model: fed.model,
            clients: &fed.clients,
        }),
    };
    let train_loss = ClientLoss {
        model: fed.model,
        clients: &fed.clients,
    };
    let runner = Runner { fed, spec, exec };

    let initial_params = fed.model.init(spec.seed);
    let mut global = initial_params.clone();
    let mut best_params = global.clone();
    let mut best: Option<(f64, usize)> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut current = scheduler.initial();
    let mut ledger = CommunicationLedger::default();
    let mut records = Vec::new();

    for round in 0..spec.rounds {
        let abort = |e: Error| e.in_round(round);
        let mut is_solve_round = false;
        match scheduler.plan(round, current) {
            Plan::Keep(m) => current = m,
            Plan::Solve { intermediate_size } => {
                is_solve_round = true;
                hooks.round_started(round, true);
                let size = intermediate_size.min(max_subset);
                let ids: Vec<usize> = if size == num_clients {
                    (0..num_clients).collect()
                } else {
                    sampler.sample(size).map_err(abort)?
                };
                let epochs = scheduler
                    .isp_config()
                    .and_then(|c| c.intermediate_epochs)
                    .unwrap_or(spec.local.epochs);
                let updates = runner
                    .get_updates(&global, &ids, round, PHASE_INTERMEDIATE, epochs)
                    .map_err(abort)?;
                sampler.refresh_losses(updates.iter().map(|u| (u.client_id, u.start_loss)));
                let states: Vec<ClientState> = updates
                    .into_iter()
                    .map(|u| ClientState {
                        client_id: u.client_id,
                        weight: fed.clients[u.client_id].weight,
                        params: u.params,
                    })
                    .collect();
                let ledger_total = ledger.record(ids.len());
                let report = scheduler
                    .solve(&global, current, &states, &mut sampler, &estim_loss, exec)
                    .map_err(abort)?;
                current = report.chosen;
                records.push(RoundRecord {
                    round,
                    is_intermediate: true,
                    is_solve_round: true,
                    m: ids.len(),
                    participants: ids,
                    train_loss: None,
                    val_loss: None,
                    val_accuracy: None,
                    test_loss: None,
                    test_accuracy: None,
                    ledger_delta: states.len(),
                    ledger_total,
                    solve: Some(report),
                });
                hooks.round_finished(round, true);
            }
        }

        hooks.round_started(round, false);
        let m = current.clamp(1, max_subset);
        let participants = sampler.sample(m).map_err(abort)?;
        let updates = runner
            .get_updates(&global, &participants, round, PHASE_ROUND, spec.local.epochs)
            .map_err(abort)?;
        sampler.refresh_losses(updates.iter().map(|u| (u.client_id, u.start_loss)));
        global = runner.aggregate(&updates).map_err(abort)?;
        let ledger_total = ledger.record(participants.len());

        let train = train_loss.subset_loss(&global, &participants).map_err(abort)?;
        let val = fed.evaluate_global(&global).map_err(abort)?;
        let test = fed.evaluate_test(&global).map_err(abort)?;
        if !(train.is_finite() && val.loss.is_finite()) {
            return Err(abort(Error::NonFinite {
                what: "global loss",
                round: Some(round),
                client: None,
            }));
        }
        records.push(RoundRecord {
            round,
            is_intermediate: false,
            is_solve_round,
            m: participants.len(),
            participants,
            train_loss: Some(train),
            val_loss: Some(val.loss),
            val_accuracy: Some(val.accuracy),
            test_loss: test.map(|t| t.loss),
            test_accuracy: test.map(|t| t.accuracy),
            ledger_delta: m,
            ledger_total,
            solve: None,
        });
        hooks.round_finished(round, false);

        if best.is_none_or(|(loss, _)| val.loss < loss) {
            best = Some((val.loss, records.len() - 1));
            best_params = global.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        if spec.patience.is_some_and(|p| stale >= p) {
            stopped_early = true;
            break;
        }
    }

    Ok(RunResult {
        initial_params,
        final_params: global,
        best_params,
        records,
        ledger,
        best_record: best.map(|(_, i)| i),
        stopped_early,
        spec: spec.clone(),
    })
}
