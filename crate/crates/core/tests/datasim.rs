use ispfl_core::datasim::{
    dirichlet_partition, generate_synthetic, stratified_split, Partition,
};
use proptest::prelude::*;

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

fn histogram(rows: &[usize], labels: &[usize], classes: usize) -> Vec<usize> {
    let mut h = vec![0; classes];
    for &r in rows {
        h[labels[r]] += 1;
    }
    h
}

fn mean_client_entropy(labels: &[usize], classes: usize, m: usize, alpha: f64, seed: u64) -> f64 {
    let p = dirichlet_partition(labels, classes, m, alpha, seed).unwrap();
    let total: f64 = p
        .client_indices
        .iter()
        .map(|rows| entropy(&histogram(rows, labels, classes)))
        .sum();
    total / m as f64
}

#[test]
fn balanced_classes() {
    let d = generate_synthetic(2, 3, 10, 1.0, 0).unwrap();
    assert_eq!(d.class_counts(), vec![5, 5]);
    let d = generate_synthetic(3, 3, 11, 1.0, 0).unwrap();
    let counts = d.class_counts();
    assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    assert_eq!(generate_synthetic(3, 2, 50, 1.0, 4).unwrap(), generate_synthetic(3, 2, 50, 1.0, 4).unwrap());
}

#[test]
fn nearest_centroid_separates_wide_clusters() {
    for classes in [2, 3] {
        let d = generate_synthetic(classes, 2, 200, 10.0, 0).unwrap();
        let rows = d.rows();
        let mut centroids = vec![[0.0f64; 2]; classes];
        let counts = d.class_counts();
        for i in 0..rows.len() {
            let c = rows.labels()[i];
            for j in 0..2 {
                centroids[c][j] += rows.row(i)[j] / counts[c] as f64;
            }
        }
        let mut correct = 0;
        for i in 0..rows.len() {
            let x = rows.row(i);
            let dist = |c: &[f64; 2]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            let pred = (0..classes)
                .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                .unwrap();
            correct += (pred == rows.labels()[i]) as usize;
        }
        let acc = correct as f64 / rows.len() as f64;
        assert!(acc >= 0.99, "{classes} classes: accuracy {acc}");
    }
}

#[test]
fn near_uniform_regime_keeps_global_proportions() {
    let d = generate_synthetic(2, 2, 4000, 1.0, 0).unwrap();
    let p = dirichlet_partition(d.labels(), 2, 4, 1000.0, 0).unwrap();
    for rows in &p.client_indices {
        let h = histogram(rows, d.labels(), 2);
        let share = h[0] as f64 / rows.len() as f64;
        assert!((share - 0.5).abs() <= 0.05, "share {share}");
    }
}

#[test]
fn single_client_holds_everything() {
    let d = generate_synthetic(3, 2, 90, 1.0, 0).unwrap();
    let p = dirichlet_partition(d.labels(), 3, 1, 0.5, 2).unwrap();
    let mut rows = p.client_indices[0].clone();
    rows.sort_unstable();
    assert_eq!(rows, (0..90).collect::<Vec<_>>());
}

#[test]
fn too_many_clients_is_rejected() {
    let d = generate_synthetic(2, 2, 10, 1.0, 0).unwrap();
    assert!(dirichlet_partition(d.labels(), 2, 11, 1.0, 0).is_err());
}

#[test]
fn strong_heterogeneity_at_small_alpha() {
    let classes = 10;
    let d = generate_synthetic(classes, 2, 20000, 1.0, 0).unwrap();
    let global = entropy(&d.class_counts());
    for seed in 0..5 {
        let mean = mean_client_entropy(d.labels(), classes, 100, 0.1, seed);
        assert!(mean < 0.6 * global, "seed {seed}: {mean} vs global {global}");
    }
}

#[test]
fn entropy_grows_with_alpha() {
    let classes = 10;
    let d = generate_synthetic(classes, 2, 10000, 1.0, 1).unwrap();
    let alphas = [0.1, 0.5, 5.0, 1000.0];
    let ordered = (0..5)
        .filter(|&seed| {
            let e: Vec<f64> = alphas
                .iter()
                .map(|&a| mean_client_entropy(d.labels(), classes, 50, a, seed))
                .collect();
            e.windows(2).all(|w| w[0] <= w[1])
        })
        .count();
    assert!(ordered >= 3, "only {ordered} of 5 seeds ordered");
}

fn labels_for(classes: &[usize]) -> Vec<usize> {
    classes
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect()
}

#[test]
fn split_examples() {
    let labels = labels_for(&[10]);
    let p = Partition {
        client_indices: vec![(0..10).collect()],
        alpha: 1.0,
    };
    let h = &stratified_split(&p, &labels, 1, 0)[0];
    assert_eq!((h.train_indices.len(), h.val_indices.len()), (8, 2));

    let labels = labels_for(&[10, 3]);
    let p = Partition {
        client_indices: vec![(0..13).collect()],
        alpha: 1.0,
    };
    let h = &stratified_split(&p, &labels, 2, 0)[0];
    assert!(h.val_indices.iter().all(|&r| labels[r] == 0));
    assert_eq!(h.train_indices.iter().filter(|&&r| labels[r] == 1).count(), 3);
    assert_eq!(h.val_indices.len(), 2);
}

#[test]
fn seven_row_client_gets_one_validation_row() {
    let labels = labels_for(&[7]);
    let p = Partition {
        client_indices: vec![(0..7).collect()],
        alpha: 1.0,
    };
    assert_eq!(stratified_split(&p, &labels, 1, 0)[0].val_indices.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn partition_is_a_disjoint_cover(m in 1usize..60, alpha in 0.01f64..100.0, seed: u64, classes in 2usize..6, extra in 0usize..400) {
        let n = m.max(classes) + extra;
        let d = generate_synthetic(classes, 1, n, 1.0, seed).unwrap();
        let p = dirichlet_partition(d.labels(), classes, m, alpha, seed).unwrap();
        prop_assert_eq!(p.num_clients(), m);
        prop_assert!(p.is_valid_cover(n));

        let handles = stratified_split(&p, d.labels(), classes, seed);
        let mut seen = vec![false; n];
        let mut weight_sum = 0.0;
        for h in &handles {
            weight_sum += h.weight;
            for &r in h.train_indices.iter().chain(&h.val_indices) {
                prop_assert!(!seen[r]);
                seen[r] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
        prop_assert!((weight_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_ratio_bounds(counts in proptest::collection::vec(5usize..40, 1..5), seed: u64) {
        let labels = labels_for(&counts);
        let total = labels.len();
        let p = Partition { client_indices: vec![(0..total).collect()], alpha: 1.0 };
        let h = &stratified_split(&p, &labels, counts.len(), seed)[0];
        let ratio = h.val_indices.len() as f64 / total as f64;
        // No integer count of seven rows lands in the band.
        prop_assume!(total != 7);
        prop_assert!((0.15..=0.25).contains(&ratio), "ratio {} for {:?}", ratio, counts);
        for c in 0..counts.len() {
            prop_assert!(h.train_indices.iter().any(|&r| labels[r] == c));
        }
    }
}
