use crate::error::{shape_err, Result};
use crate::numerics::{conv1d, ops, pool_global, PoolKind, Scalar, Var};
use crate::numerics::ops::pool_max_at;

/// Node attention over `x: [B, C, N]`.
///
/// Average and max statistics are taken over channels for each node, both
/// pass through the same odd-width 1D convolution, and their sum is
/// squashed by a sigmoid into a per-node multiplier in (0, 1).
pub fn node_attention<S: Scalar>(x: &Var<S>, kernel: &Var<S>) -> Result<Var<S>> {
    let gate = node_attention_gate(x, kernel)?;
    ops::mul_gate(x, &gate)
}

/// [`node_attention`] with the channel argmax of the max statistic supplied
/// by the caller (see [`ops::argmax_along`] over axis 1).
pub fn node_attention_at<S: Scalar>(x: &Var<S>, kernel: &Var<S>, argmax: Vec<usize>) -> Result<Var<S>> {
    check_rank(x)?;
    let z_avg = pool_global(x, 1, PoolKind::Avg)?;
    let z_max = pool_max_at(x, 1, argmax)?;
    let logits = ops::add(&conv1d(&z_avg, kernel)?, &conv1d(&z_max, kernel)?)?;
    ops::mul_gate(x, &ops::sigmoid(&logits)?)
}

fn check_rank<S: Scalar>(x: &Var<S>) -> Result<()> {
    if x.shape().len() != 3 {
        return Err(shape_err!("node attention expects [B, C, N], got {:?}", x.shape()));
    }
    Ok(())
}

/// The `[B, 1, N]` attention multipliers alone.
pub fn node_attention_gate<S: Scalar>(x: &Var<S>, kernel: &Var<S>) -> Result<Var<S>> {
    check_rank(x)?;
    let z_avg = pool_global(x, 1, PoolKind::Avg)?;
    let z_max = pool_global(x, 1, PoolKind::Max)?;
    let logits = ops::add(&conv1d(&z_avg, kernel)?, &conv1d(&z_max, kernel)?)?;
    ops::sigmoid(&logits)
}
