use ispfl_core::sampling::{ClientSampler, StrategyConfig, StrategyKind};
use proptest::prelude::*;

#[test]
fn uniform_inclusion_frequency() {
    let draws = 100_000;
    let mut s = ClientSampler::new(StrategyKind::Uniform, 5, 0).unwrap();
    let mut hits = [0usize; 5];
    for _ in 0..draws {
        for id in s.sample(2).unwrap() {
            hits[id] += 1;
        }
    }
    let sigma = (0.4f64 * 0.6 / draws as f64).sqrt();
    for (id, &h) in hits.iter().enumerate() {
        let freq = h as f64 / draws as f64;
        assert!((freq - 0.4).abs() <= 0.01, "client {id}: {freq}");
        assert!((freq - 0.4).abs() <= 3.0 * sigma, "client {id}: {freq}");
    }
}

#[test]
fn valuation_single_draw_is_proportional() {
    let draws = 100_000;
    let weights = vec![1.0, 2.0, 3.0, 4.0];
    let mut s = ClientSampler::new(StrategyKind::Valuation { weights: weights.clone() }, 4, 9).unwrap();
    let mut hits = [0usize; 4];
    for _ in 0..draws {
        hits[s.sample(1).unwrap()[0]] += 1;
    }
    for (id, &h) in hits.iter().enumerate() {
        let p = weights[id] / 10.0;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = h as f64 / draws as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "client {id}: {freq} vs {p}");
    }
}

#[test]
fn valuation_defaults_to_dataset_weights() {
    let resolved = StrategyConfig::Valuation { weights: None }
        .resolve(&[0.25, 0.75])
        .unwrap();
    assert_eq!(resolved, StrategyKind::Valuation { weights: vec![0.25, 0.75] });
}

#[test]
fn same_seed_same_sequence() {
    for kind in [
        StrategyKind::Uniform,
        StrategyKind::PowD { pool: 6 },
        StrategyKind::Valuation { weights: (1..=10).map(f64::from).collect() },
    ] {
        let mut a = ClientSampler::new(kind.clone(), 10, 42).unwrap();
        let mut b = ClientSampler::new(kind.clone(), 10, 42).unwrap();
        for round in 0..50 {
            let m = 1 + round % 5;
            let sa = a.sample(m).unwrap();
            assert_eq!(sa, b.sample(m).unwrap());
            let reports: Vec<_> = sa.iter().map(|&id| (id, (id * round) as f64)).collect();
            a.refresh_losses(reports.clone());
            b.refresh_losses(reports);
        }
    }
}

fn kind_strategy(num_clients: usize) -> impl Strategy<Value = StrategyKind> {
    prop_oneof![
        Just(StrategyKind::Uniform),
        (1..=num_clients).prop_map(|pool| StrategyKind::PowD { pool }),
        proptest::collection::vec(0.01f64..10.0, num_clients)
            .prop_map(|weights| StrategyKind::Valuation { weights }),
    ]
}

proptest! {
    #[test]
    fn subsets_have_requested_size_without_duplicates(
        (num_clients, kind) in (1usize..40).prop_flat_map(|n| (Just(n), kind_strategy(n))),
        seed: u64,
        requests in proptest::collection::vec(1usize..40, 1..20),
    ) {
        let mut s = ClientSampler::new(kind, num_clients, seed).unwrap();
        let cap = s.max_subset(num_clients);
        for (k, m) in requests.into_iter().enumerate() {
            let m = 1 + (m - 1) % cap;
            let subset = s.sample(m).unwrap();
            prop_assert_eq!(subset.len(), m);
            prop_assert!(subset.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(subset.iter().all(|&id| id < num_clients));
            s.refresh_losses(subset.iter().map(|&id| (id, ((id + k) % 7) as f64)));
        }
        prop_assert!(s.sample(cap + 1).is_err());
    }

    #[test]
    fn sample_from_stays_inside_the_pool(seed: u64, pool in proptest::sample::subsequence((0..30).collect::<Vec<usize>>(), 1..30), m in 1usize..30) {
        let mut s = ClientSampler::new(StrategyKind::Uniform, 30, seed).unwrap();
        let m = 1 + (m - 1) % pool.len();
        let subset = s.sample_from(m, &pool).unwrap();
        prop_assert_eq!(subset.len(), m);
        prop_assert!(subset.iter().all(|id| pool.contains(id)));
    }
}
