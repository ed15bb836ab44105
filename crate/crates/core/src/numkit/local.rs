use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Batch, ModelSpec, OptimizerConfig, OptimizerState, ParamVector};
use crate::{seed, Error, Result};

/// The data one client holds: a training split, a held-out validation split
/// and its aggregation weight `n_i / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientData {
    pub id: usize,
    pub train: Batch,
    pub val: Batch,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalTraining {
    pub epochs: usize,
    /// Mini-batch size; `0` means full batch.
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
}

/// Keys the mini-batch shuffle stream of one client computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateContext {
    pub run_seed: u64,
    pub round: usize,
    /// Distinguishes ordinary rounds from intermediate rounds at the same index.
    pub phase: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ParamVector,
    /// Training-split size `n_i`.
    pub num_samples: usize,
    /// Training loss at the received global model, before any local step.
    pub start_loss: f64,
    /// Mean mini-batch loss over the last local epoch.
    pub train_loss: f64,
    /// Validation loss at the returned parameters (`None` for an empty split).
    pub val_loss: Option<f64>,
}

/// Trains a copy of `global` on the client's training split.
///
/// Each epoch visits the split in an order shuffled by a stream keyed on
/// `(run_seed, client, round, epoch)`, so the result is independent of which
/// thread runs it. Optimizer state starts fresh.
pub fn client_update(
    model: &ModelSpec,
    global: &ParamVector,
    client: &ClientData,
    plan: &LocalTraining,
    ctx: UpdateContext,
) -> Result<ClientUpdate> {
    if client.train.is_empty() {
        return Err(Error::EmptyClient { client: client.id });
    }
    if plan.epochs == 0 {
        return Err(Error::config("training.epochs", "must be >= 1"));
    }
    let with_context = |e: Error| match e {
        Error::NonFinite { what, .. } => Error::NonFinite {
            what,
            round: Some(ctx.round),
            client: Some(client.id),
        },
        other => other,
    };

    let n = client.train.len();
    let batch_size = if plan.batch_size == 0 || plan.batch_size > n {
        n
    } else {
        plan.batch_size
    };
    let start_loss = model.loss(global, &client.train)?;

    let mut params = global.clone();
    let mut optimizer = OptimizerState::new(plan.optimizer, model.dim());
    let mut order: Vec<usize> = (0..n).collect();
    let mut train_loss = start_loss;
    for epoch in 0..plan.epochs {
        let mut rng = seed::stream(
            ctx.run_seed,
            &[
                ctx.phase,
                client.id as u64,
                ctx.round as u64,
                epoch as u64,
            ],
        );
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch = if chunk.len() == n {
                // Full batch: skip the copy, row order does not affect the mean.
                None
            } else {
                Some(client.train.gather(chunk))
            };
            let batch = batch.as_ref().unwrap_or(&client.train);
            let (loss, grad) = model.loss_and_gradient(&params, batch)?;
            weighted += loss * chunk.len() as f64;
            optimizer.step(&mut params, &grad).map_err(with_context)?;
        }
        train_loss = weighted / n as f64;
    }

    let val_loss = if client.val.is_empty() {
        None
    } else {
        Some(model.loss(&params, &client.val)?)
    };
    Ok(ClientUpdate {
        client_id: client.id,
        params,
        num_samples: n,
        start_loss,
        train_loss,
        val_loss,
    })
}
