use ispfl_core::compress::Compressor;
use ispfl_core::datasim::GaussianMixture;
use ispfl_core::ispcore::{IspConfig, SchedulerConfig};
use ispfl_core::numkit::{
    client_update, ClientUpdate, LocalTraining, OptimizerConfig, ParamVector, UpdateContext,
};
use ispfl_core::orchestrator::{
    aggregate, apply_compression, run_training, CountMode, DataConfig, Federation, ModelConfig,
    RunResult, RunSpec,
};
use ispfl_core::sampling::StrategyConfig;
use ispfl_core::{Error, Sequential};
use proptest::prelude::*;

fn data(num_clients: usize, samples: usize) -> DataConfig {
    DataConfig {
        classes: 3,
        features: 4,
        samples,
        test_samples: 60,
        class_sep: 2.0,
        alpha: 0.5,
        num_clients,
        model: ModelConfig::Softmax,
    }
}

fn spec(rounds: usize, scheduler: SchedulerConfig) -> RunSpec {
    RunSpec {
        rounds,
        local: LocalTraining {
            epochs: 1,
            batch_size: 8,
            optimizer: OptimizerConfig::Sgd { lr: 0.1 },
        },
        patience: None,
        scheduler,
        strategy: StrategyConfig::Uniform,
        compression: None,
        seed: 3,
    }
}

fn isp(initial: usize, solve_every: usize) -> SchedulerConfig {
    SchedulerConfig::Isp(IspConfig {
        solve_every,
        depth: 3,
        ..IspConfig::new(initial)
    })
}

fn run(fed: &Federation, spec: &RunSpec) -> RunResult {
    run_training(fed, spec, &Sequential, &mut ()).unwrap()
}

fn ordinary(r: &RunResult) -> impl Iterator<Item = &ispfl_core::orchestrator::RoundRecord> {
    r.records.iter().filter(|r| !r.is_intermediate)
}

#[test]
fn zero_rounds() {
    let fed = Federation::build(&data(5, 300), 0).unwrap();
    let r = run(&fed, &spec(0, SchedulerConfig::Fixed { m: 2 }));
    assert!(r.records.is_empty());
    assert_eq!(r.ledger.total(), 0);
    assert_eq!(r.final_params, r.initial_params);
    assert_eq!(r.best_params, r.initial_params);
    assert_eq!(r.communications(CountMode::ToBest), 0);
}

#[test]
fn fixed_schedule_ledger() {
    let fed = Federation::build(&data(6, 400), 1).unwrap();
    let r = run(&fed, &spec(13, SchedulerConfig::Fixed { m: 4 }));
    assert_eq!(r.records.len(), 13);
    assert!(r.records.iter().all(|rec| !rec.is_intermediate && rec.m == 4 && rec.ledger_delta == 4));
    assert_eq!(r.ledger.total(), 4 * 13);
    assert_eq!(r.communications(CountMode::Total), 52);
    let best = r.best().unwrap();
    assert_eq!(r.communications(CountMode::ToBest), 4 * (best.round + 1));
}

#[test]
fn isp_ledger_fold_and_cadence() {
    let fed = Federation::build(&data(7, 500), 2).unwrap();
    for rounds in [1, 5, 6, 17] {
        let r = run(&fed, &spec(rounds, isp(3, 5)));
        let solves = r.records.iter().filter(|rec| rec.is_intermediate).count();
        assert_eq!(solves, rounds.div_ceil(5));
        let ms: usize = ordinary(&r).map(|rec| rec.m).sum();
        assert_eq!(r.ledger.total(), ms + solves * 7);
        let fold: usize = r.records.iter().map(|rec| rec.ledger_delta).sum();
        assert_eq!(fold, r.ledger.total());
        assert_eq!(r.ledger.deltas().iter().sum::<usize>(), r.ledger.total());
        let mut running = 0;
        for rec in &r.records {
            running += rec.ledger_delta;
            assert_eq!(rec.ledger_total, running);
            if rec.is_intermediate {
                assert_eq!(rec.participants.len(), 7);
                assert!(rec.solve.is_some());
            }
        }
        // Counts only change on solve rounds.
        for w in ordinary(&r).collect::<Vec<_>>().windows(2) {
            if w[1].round % 5 != 0 {
                assert_eq!(w[0].m, w[1].m);
            }
        }
    }
    let fixed = run(&fed, &spec(9, SchedulerConfig::Fixed { m: 3 }));
    assert!(fixed.records.iter().all(|rec| !rec.is_solve_round));
}

#[test]
fn partial_intermediate_round_uses_sampled_clients() {
    let fed = Federation::build(&data(10, 600), 2).unwrap();
    let cfg = SchedulerConfig::Isp(IspConfig {
        solve_every: 4,
        depth: 2,
        intermediate_size: Some(4),
        ..IspConfig::new(5)
    });
    let r = run(&fed, &spec(9, cfg));
    for rec in r.records.iter().filter(|rec| rec.is_intermediate) {
        assert_eq!(rec.ledger_delta, 4);
        let solve = rec.solve.as_ref().unwrap();
        assert!(solve.candidates.iter().all(|c| c.m <= 4));
    }
}

#[test]
fn pow_d_counts_are_capped_by_the_pool() {
    let fed = Federation::build(&data(8, 500), 5).unwrap();
    let mut s = spec(6, isp(8, 3));
    s.strategy = StrategyConfig::PowD { d: 5 };
    let r = run(&fed, &s);
    for rec in &r.records {
        assert!(rec.m <= if rec.is_intermediate { 8 } else { 5 });
    }
}

#[test]
fn best_round_minimizes_validation_loss() {
    let fed = Federation::build(&data(6, 400), 6).unwrap();
    let r = run(&fed, &spec(30, SchedulerConfig::Fixed { m: 2 }));
    let best = r.best().unwrap();
    let min = ordinary(&r).map(|rec| rec.val_loss.unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(best.val_loss.unwrap(), min);
    assert_eq!(fed.evaluate_global(&r.best_params).unwrap().loss, min);
}

#[test]
fn patience_stops_the_run() {
    let fed = Federation::build(&data(6, 400), 6).unwrap();
    let mut s = spec(500, SchedulerConfig::Fixed { m: 2 });
    s.local.optimizer = OptimizerConfig::Sgd { lr: 2.0 };
    s.patience = Some(3);
    let r = run(&fed, &s);
    assert!(r.stopped_early);
    let last = r.records.last().unwrap().round;
    assert_eq!(last, r.best().unwrap().round + 3);
}

#[test]
fn divergence_aborts_with_round_context() {
    let fed = Federation::build(&data(4, 200), 0).unwrap();
    let mut s = spec(50, SchedulerConfig::Fixed { m: 4 });
    s.local.optimizer = OptimizerConfig::Sgd { lr: f64::MAX };
    match run_training(&fed, &s, &Sequential, &mut ()) {
        Err(Error::RoundAborted { round, source }) => {
            assert!(round < 50);
            assert!(matches!(*source, Error::NonFinite { .. }));
        }
        other => panic!("expected an aborted round, got {other:?}"),
    }
}

#[test]
fn aggregate_examples() {
    let a = ParamVector::from_vec(vec![1.0, 2.0]);
    let b = ParamVector::from_vec(vec![5.0, -2.0]);
    assert_eq!(aggregate([(0, &a, 0.3), (1, &a, 0.9)]).unwrap(), a);
    assert_eq!(
        aggregate([(0, &a, 1.0), (1, &b, 3.0)]).unwrap(),
        ParamVector::from_vec(vec![4.0, -1.0])
    );
    let short = ParamVector::zeros(1);
    assert!(aggregate([(0, &a, 1.0), (1, &short, 1.0)]).is_err());
}

#[test]
fn full_participation_full_batch_is_a_centralized_step() {
    let fed = Federation::build(&data(5, 300), 7).unwrap();
    let lr = 0.5;
    let mut s = spec(1, SchedulerConfig::Fixed { m: 5 });
    s.local = LocalTraining {
        epochs: 1,
        batch_size: 0,
        optimizer: OptimizerConfig::Sgd { lr },
    };
    let r = run(&fed, &s);
    let pooled: Vec<usize> = fed.handles.iter().flat_map(|h| h.train_indices.clone()).collect();
    let x0 = &r.initial_params;
    let grad = fed.model.gradient(x0, &fed.dataset.gather(&pooled)).unwrap();
    for j in 0..x0.len() {
        let want = x0[j] - lr * grad[j];
        assert!((r.final_params[j] - want).abs() < 1e-9);
    }
}

#[test]
fn full_size_compression_is_the_identity() {
    let fed = Federation::build(&data(6, 400), 8).unwrap();
    let plain = run(&fed, &spec(12, isp(3, 4)));
    for c in [Compressor::TopK { fraction: 1.0 }, Compressor::RandK { fraction: 1.0 }] {
        let mut s = spec(12, isp(3, 4));
        s.compression = Some(c);
        let r = run(&fed, &s);
        assert_eq!(r.records, plain.records);
        let bits = |p: &ParamVector| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r.final_params), bits(&plain.final_params));
    }
}

#[test]
fn rand_k_runs_replay() {
    let fed = Federation::build(&data(6, 400), 9).unwrap();
    let mut s = spec(10, SchedulerConfig::Fixed { m: 3 });
    s.compression = Some(Compressor::RandK { fraction: 0.3 });
    let a = run(&fed, &s);
    let b = run(&fed, &s);
    assert_eq!(a, b);
    s.seed += 1;
    assert_ne!(run(&fed, &s).final_params, a.final_params);
}

#[test]
fn top_k_changes_only_the_kept_coordinates() {
    let fed = Federation::build(&data(4, 300), 10).unwrap();
    let global = fed.model.init(0);
    let plan = LocalTraining {
        epochs: 2,
        batch_size: 4,
        optimizer: OptimizerConfig::Sgd { lr: 0.2 },
    };
    let ctx = UpdateContext {
        run_seed: 0,
        round: 0,
        phase: 0,
    };
    let full = client_update(&fed.model, &global, &fed.clients[0], &plan, ctx).unwrap();
    let compressor = Compressor::TopK { fraction: 0.05 };
    let k = compressor.k_for(global.len());
    let sent: ClientUpdate = apply_compression(full.clone(), &compressor, &global, 1).unwrap();
    let changed: Vec<usize> = (0..global.len()).filter(|&j| sent.params[j] != global[j]).collect();
    assert!(changed.len() <= k);
    for j in 0..global.len() {
        if sent.params[j] != global[j] {
            assert_eq!(sent.params[j], full.params[j]);
        }
    }
}

#[test]
fn global_evaluation() {
    let cfg = DataConfig {
        classes: 2,
        features: 2,
        samples: 1000,
        test_samples: 0,
        class_sep: 10.0,
        alpha: 1.0,
        num_clients: 5,
        model: ModelConfig::Softmax,
    };
    let fed = Federation::build(&cfg, 0).unwrap();
    let zero = ParamVector::zeros(fed.model.dim());
    let chance = fed.evaluate_global(&zero).unwrap();
    assert!((chance.accuracy - 0.5).abs() <= 0.05, "{}", chance.accuracy);
    assert!((chance.loss - 2f64.ln()).abs() < 1e-12);

    // Nearest-centroid rule as a linear model: w_c = mu_c, b_c = -|mu_c|^2 / 2.
    let means = GaussianMixture::new(2, 2, 10.0).unwrap().means().to_vec();
    let mut params = Vec::new();
    for mu in &means {
        params.extend_from_slice(mu);
        params.push(-mu.iter().map(|v| v * v).sum::<f64>() / 2.0);
    }
    let e = fed.evaluate_global(&ParamVector::from_vec(params.clone())).unwrap();
    assert!(e.accuracy >= 0.99, "{}", e.accuracy);

    let pooled: Vec<usize> = fed.handles.iter().flat_map(|h| h.val_indices.clone()).collect();
    let direct = fed.model.loss(&ParamVector::from_vec(params), &fed.dataset.gather(&pooled)).unwrap();
    assert!((e.loss - direct).abs() < 1e-12);
    assert_eq!(e.count, pooled.len());
    assert!(fed.evaluate_test(&zero).unwrap().is_none());
}

#[test]
fn invalid_specs_are_rejected() {
    let fed = Federation::build(&data(4, 200), 0).unwrap();
    let mut s = spec(3, SchedulerConfig::Fixed { m: 9 });
    assert!(run_training(&fed, &s, &Sequential, &mut ()).is_err());
    s.scheduler = SchedulerConfig::Fixed { m: 2 };
    s.local.epochs = 0;
    assert!(run_training(&fed, &s, &Sequential, &mut ()).is_err());
    let mut bad = data(4, 200);
    bad.num_clients = 0;
    assert!(Federation::build(&bad, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_ignores_arrival_order(
        vectors in proptest::collection::vec((proptest::collection::vec(-1e3f64..1e3, 6), 0.01f64..5.0), 1..12),
        shuffle_key: u64,
    ) {
        let params: Vec<ParamVector> = vectors.iter().map(|(v, _)| ParamVector::from_vec(v.clone())).collect();
        let items: Vec<(usize, &ParamVector, f64)> = params.iter().zip(&vectors).enumerate().map(|(i, (p, (_, w)))| (i, p, *w)).collect();
        let mut shuffled = items.clone();
        let n = shuffled.len();
        let mut key = shuffle_key;
        for i in (1..n).rev() {
            key = key.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (key >> 33) as usize % (i + 1));
        }
        let a = aggregate(items).unwrap();
        let b = aggregate(shuffled).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
