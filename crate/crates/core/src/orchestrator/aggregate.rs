use alloc::vec::Vec;

use crate::numkit::ParamVector;
use crate::{Error, Result};

/// Weighted mean of client parameters with weights renormalized over the
/// participants.
///
/// Items are `(client_id, params, weight)`. Summation runs in client-id
/// order, so the result is bit-identical for any arrival order.
pub fn aggregate<'a, I>(items: I) -> Result<ParamVector>
where
    I: IntoIterator<Item = (usize, &'a ParamVector, f64)>,
{
    let mut items: Vec<(usize, &ParamVector, f64)> = items.into_iter().collect();
    if items.is_empty() {
        return Err(Error::config("aggregate", "no updates to aggregate"));
    }
    items.sort_by_key(|&(id, _, _)| id);
    let dim = items[0].1.len();
    let total: f64 = items.iter().map(|&(_, _, w)| w).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::config("aggregate", "weights must sum to a positive finite value"));
    }
    let mut out = alloc::vec![0.0; dim];
    for &(_, params, w) in &items {
        params.check_len(dim)?;
        let share = w / total;
        for (o, p) in out.iter_mut().zip(params.iter()) {
            *o += share * p;
        }
    }
    Ok(ParamVector::from_vec(out))
}
