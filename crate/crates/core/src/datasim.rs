//! Synthetic labelled data, Dirichlet label partitioning across clients and
//! stratified per-client train/validation splits.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numkit::{Batch, ClientData};
use crate::{seed, Error, Result};

/// Validation share of every stratified split (train : val = 4 : 1).
pub const VAL_FRACTION_DENOM: usize = 5;
/// Classes with fewer samples than this on a client stay wholly in training.
pub const MIN_SPLIT_CLASS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Batch,
    num_classes: usize,
}

impl Dataset {
    pub fn new(rows: Batch, num_classes: usize) -> Result<Self> {
        if rows.labels().iter().any(|&y| y >= num_classes) {
            return Err(Error::config("dataset.labels", "label out of range"));
        }
        Ok(Dataset { rows, num_classes })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.rows.num_features()
    }

    pub fn labels(&self) -> &[usize] {
        self.rows.labels()
    }

    pub fn rows(&self) -> &Batch {
        &self.rows
    }

    pub fn gather(&self, indices: &[usize]) -> Batch {
        self.rows.gather(indices)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in self.labels() {
            counts[y] += 1;
        }
        counts
    }
}

/// Isotropic unit-variance Gaussian clusters, one per class.
///
/// Nearest class means sit exactly `class_sep` apart: on scaled basis vectors
/// when `features >= classes`, on a regular polygon in the first two
/// coordinates when `2 <= features < classes`, and on a line for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
    features: usize,
}

impl GaussianMixture {
    pub fn new(classes: usize, features: usize, class_sep: f64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::config("data.classes", "need at least 2 classes"));
        }
        if features == 0 {
            return Err(Error::config("data.features", "need at least 1 feature"));
        }
        if !(class_sep.is_finite() && class_sep >= 0.0) {
            return Err(Error::config("data.class_sep", "must be finite and >= 0"));
        }
        let means = (0..classes)
            .map(|c| {
                let mut mean = vec![0.0; features];
                if features >= classes {
                    mean[c] = class_sep / core::f64::consts::SQRT_2;
                } else if features == 1 {
                    mean[0] = c as f64 * class_sep;
                } else {
                    let step = core::f64::consts::PI / classes as f64;
                    let radius = class_sep / (2.0 * libm::sin(step));
                    let angle = 2.0 * step * c as f64;
                    mean[0] = radius * libm::cos(angle);
                    mean[1] = radius * libm::sin(angle);
                }
                mean
            })
            .collect();
        Ok(GaussianMixture { means, features })
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// Draws `n` rows with class counts differing by at most one.
    pub fn sample(&self, n: usize, stream_seed: u64) -> Dataset {
        let classes = self.classes();
        let mut rng = seed::stream(stream_seed, &[seed::tag::DATA]);
        let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        labels.shuffle(&mut rng);
        let mut features = Vec::with_capacity(n * self.features);
        for &y in &labels {
            for &mu in &self.means[y] {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(mu + z);
            }
        }
        let rows = Batch::new(features, labels, self.features).expect("consistent shapes");
        Dataset {
            rows,
            num_classes: classes,
        }
    }
}

pub fn generate_synthetic(
    classes: usize,
    features: usize,
    n: usize,
    class_sep: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < classes {
        return Err(Error::config("data.samples", "need at least one row per class"));
    }
    Ok(GaussianMixture::new(classes, features, class_sep)?.sample(n, seed))
}

/// Disjoint cover of the source rows by `M` nonempty clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub client_indices: Vec<Vec<usize>>,
    pub alpha: f64,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.client_indices.len()
    }

    /// True when the client arrays are nonempty, pairwise disjoint and cover `0..n`.
    pub fn is_valid_cover(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for rows in &self.client_indices {
            if rows.is_empty() {
                return false;
            }
            for &r in rows {
                if r >= n || seen[r] {
                    return false;
                }
                seen[r] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Splits the rows of every class across `num_clients` clients by one
/// Dirichlet(`alpha`, ..., `alpha`) draw per class.
///
/// Floors of the proportional counts are assigned first and the rounding
/// residual goes to the client with the largest proportion. A client left
/// empty receives one row from the currently largest client.
pub fn dirichlet_partition(
    labels: &[usize],
    num_classes: usize,
    num_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Partition> {
    if num_clients == 0 {
        return Err(Error::config("data.M", "need at least one client"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config("data.alpha", "must be finite and > 0"));
    }
    if num_clients > labels.len() {
        return Err(Error::config(
            "data.M",
            alloc::format!("{num_clients} clients but only {} rows", labels.len()),
        ));
    }
    let mut rng = seed::stream(seed, &[seed::tag::PARTITION]);
    let gamma = Gamma::new(alpha, 1.0).map_err(|_| Error::config("data.alpha", "invalid"))?;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (row, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::config("data.labels", "label out of range"));
        }
        by_class[y].push(row);
    }

    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); num_clients];
    for rows in by_class.iter_mut() {
        rows.shuffle(&mut rng);
        let mut props: Vec<f64> = (0..num_clients).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = props.iter().sum();
        if total > 0.0 && total.is_finite() {
            props.iter_mut().for_each(|p| *p /= total);
        } else {
            props.iter_mut().for_each(|p| *p = 1.0 / num_clients as f64);
        }
        let n_c = rows.len();
        let mut counts: Vec<usize> = props
            .iter()
            .map(|p| libm::floor(p * n_c as f64) as usize)
            .collect();
        let assigned: usize = counts.iter().sum();
        let top = argmax(&props);
        counts[top] += n_c - assigned;
        let mut start = 0;
        for (client, count) in counts.into_iter().enumerate() {
            clients[client].extend_from_slice(&rows[start..start + count]);
            start += count;
        }
    }

    while let Some(empty) = clients.iter().position(|c| c.is_empty()) {
        let donor = largest(&clients);
        let row = clients[donor].pop().expect("donor holds at least two rows");
        clients[empty].push(row);
    }
    for c in clients.iter_mut() {
        c.sort_unstable();
    }
    Ok(Partition {
        client_indices: clients,
        alpha,
    })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn largest(clients: &[Vec<usize>]) -> usize {
    let mut best = 0;
    for (i, c) in clients.iter().enumerate() {
        if c.len() > clients[best].len() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientHandle {
    pub client_id: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    /// `n_i / n` over training-split sizes.
    pub weight: f64,
}

/// Per-client stratified 4:1 train/validation split.
///
/// Classes with fewer than four rows on a client stay wholly in training. The
/// remaining rows contribute `round(E / 5)` validation rows, where `E` is their
/// count, allocated across classes proportionally (largest remainder).
pub fn stratified_split(
    partition: &Partition,
    labels: &[usize],
    num_classes: usize,
    seed: u64,
) -> Vec<ClientHandle> {
    let mut handles: Vec<ClientHandle> = partition
        .client_indices
        .iter()
        .enumerate()
        .map(|(client_id, rows)| {
            let mut rng = seed::stream(seed, &[seed::tag::SPLIT, client_id as u64]);
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
            for &r in rows {
                by_class[labels[r]].push(r);
            }
            let eligible: usize = by_class
                .iter()
                .map(Vec::len)
                .filter(|&c| c >= MIN_SPLIT_CLASS)
                .sum();
            let n_val = (2 * eligible + VAL_FRACTION_DENOM) / (2 * VAL_FRACTION_DENOM);
            let quotas = allocate(&by_class, eligible, n_val);

            let mut train = Vec::new();
            let mut val = Vec::new();
            for (class_rows, quota) in by_class.iter_mut().zip(quotas) {
                class_rows.shuffle(&mut rng);
                val.extend_from_slice(&class_rows[..quota]);
                train.extend_from_slice(&class_rows[quota..]);
            }
            train.sort_unstable();
            val.sort_unstable();
            ClientHandle {
                client_id,
                train_indices: train,
                val_indices: val,
                weight: 0.0,
            }
        })
        .collect();
    let total: usize = handles.iter().map(|h| h.train_indices.len()).sum();
    for h in handles.iter_mut() {
        h.weight = h.train_indices.len() as f64 / total as f64;
    }
    handles
}

/// Largest-remainder allocation of `n_val` rows over the eligible classes.
fn allocate(by_class: &[Vec<usize>], eligible: usize, n_val: usize) -> Vec<usize> {
    let mut quotas = vec![0usize; by_class.len()];
    if eligible == 0 || n_val == 0 {
        return quotas;
    }
    // Exact share = count * n_val / eligible; compare remainders as integers.
    let mut remainders = Vec::new();
    let mut given = 0;
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < MIN_SPLIT_CLASS {
            continue;
        }
        let scaled = rows.len() * n_val;
        quotas[c] = scaled / eligible;
        given += quotas[c];
        remainders.push((scaled % eligible, c));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(n_val - given) {
        quotas[c] += 1;
    }
    quotas
}

/// Gathers each client's rows into owned batches.
pub fn materialize(handles: &[ClientHandle], dataset: &Dataset) -> Vec<ClientData> {
    handles
        .iter()
        .map(|h| ClientData {
            id: h.client_id,
            train: dataset.gather(&h.train_indices),
            val: dataset.gather(&h.val_indices),
            weight: h.weight,
        })
        .collect()
}

/// Server-held holdout for the surrogate loss: `size` rows drawn without
/// replacement from `source`, optionally corrupted by label flips (each row
/// relabelled uniformly at random with probability `label_noise`) and additive
/// Gaussian feature jitter with standard deviation `feature_jitter`.
pub fn surrogate_holdout(
    source: &Dataset,
    size: usize,
    label_noise: f64,
    feature_jitter: f64,
    seed: u64,
) -> Batch {
    let mut rng = seed::stream(seed, &[seed::tag::SURROGATE]);
    let size = size.min(source.len());
    let picked = rand::seq::index::sample(&mut rng, source.len(), size).into_vec();
    let mut batch = source.gather(&picked);
    if label_noise > 0.0 {
        for y in batch.labels_mut() {
            if rng.random::<f64>() < label_noise {
                *y = rng.random_range(0..source.num_classes());
            }
        }
    }
    if feature_jitter > 0.0 {
        for x in batch.features_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += feature_jitter * z;
        }
    }
    batch
}
