//! Entropy-driven channel selection feeding a spatial attention gate.
//!
//! Each channel is scored by the mean over pixels of `-p ln p` with
//! `p = sigmoid(f)`. The `M` lowest-scoring channels are projected to a
//! single-channel map whose sigmoid gates every channel of the input.

use crate::error::{shape_err, Error, Result};
use crate::numerics::{conv2d_1x1, ops, ParamId, ParamStore, Scalar, Session, Tensor, Var};

/// Floor inside the logarithm so that `-p ln p → 0` as `p → 0`.
pub const LOG_FLOOR: f64 = 1e-12;

/// Per-channel mean pixel entropy (nats) of one feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyScores {
    pub scores: Vec<f64>,
}

impl EntropyScores {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn bottom_m(&self, m: usize) -> Result<Vec<usize>> {
        bottom_m_select(&self.scores, m)
    }
}

/// Entropy scores of every channel, one [`EntropyScores`] per batch item of
/// `f: [B, C, ...]`.
pub fn channel_entropy<S: Scalar>(f: &Tensor<S>) -> Result<Vec<EntropyScores>> {
    if f.rank() < 2 {
        return Err(shape_err!("channel_entropy expects [B, C, ...], got {:?}", f.shape()));
    }
    if !f.is_finite() {
        return Err(Error::Numeric("channel_entropy input is not finite".into()));
    }
    let (batch, chans) = (f.shape()[0], f.shape()[1]);
    let plane: usize = f.shape()[2..].iter().product();
    Ok((0..batch)
        .map(|b| EntropyScores {
            scores: (0..chans)
                .map(|c| {
                    let start = (b * chans + c) * plane;
                    let total: f64 = f.data()[start..start + plane]
                        .iter()
                        .map(|v| {
                            let p = ops::sigmoid_scalar(v.as_f64());
                            -p * p.max(LOG_FLOOR).ln()
                        })
                        .sum();
                    total / plane as f64
                })
                .collect(),
        })
        .collect())
}

/// Indices of the `m` lowest scores (ties to the lower channel index),
/// returned in ascending index order.
pub fn bottom_m_select(scores: &[f64], m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > scores.len() {
        return Err(Error::Config(format!(
            "bottom-M size {m} outside 1..={}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let by_score = |&a: &usize, &b: &usize| scores[a].total_cmp(&scores[b]).then(a.cmp(&b));
    if m < order.len() {
        order.select_nth_unstable_by(m - 1, by_score);
    }
    let mut picked = order[..m].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Spatial attention from pre-selected channels: gather, project to one
/// channel with a pointwise conv, sigmoid, multiply into every channel.
///
/// Returns the gated features and the `[B, 1, H, W]` attention map.
pub fn efs_spatial_attention<S: Scalar>(
    f: &Var<S>,
    selections: &[Vec<usize>],
    proj_weight: &Var<S>,
    proj_bias: Option<&Var<S>>,
) -> Result<(Var<S>, Var<S>)> {
    let m = selections.first().map_or(0, Vec::len);
    if proj_weight.shape() != [1, m] {
        return Err(Error::Config(format!(
            "projection expects shape [1, {m}], got {:?}",
            proj_weight.shape()
        )));
    }
    let picked = ops::gather_channels(f, selections)?;
    let attention = ops::sigmoid(&conv2d_1x1(&picked, proj_weight, proj_bias)?)?;
    Ok((ops::mul_gate(f, &attention)?, attention))
}

/// Learnable part of the entropy-selected attention gate.
#[derive(Clone, Debug)]
pub struct EfsGate {
    channels: usize,
    m: usize,
    proj_w: ParamId,
    proj_b: ParamId,
}

#[derive(Clone, Debug)]
pub struct EfsTrace<S> {
    pub scores: Vec<EntropyScores>,
    pub selections: Vec<Vec<usize>>,
    /// `[B, 1, H, W]` attention map.
    pub attention: Tensor<S>,
}

impl EfsGate {
    /// The projection starts at zero so the initial gate is exactly 0.5.
    pub fn register<S: Scalar>(store: &mut ParamStore<S>, prefix: &str, channels: usize, m: usize) -> Result<Self> {
        if m == 0 || m > channels {
            return Err(Error::Config(format!("M = {m} must lie in 1..={channels}")));
        }
        Ok(Self {
            channels,
            m,
            proj_w: store.register(format!("{prefix}.proj.weight"), Tensor::zeros(&[1, m])?)?,
            proj_b: store.register(format!("{prefix}.proj.bias"), Tensor::zeros(&[1])?)?,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn projection(&self) -> (ParamId, ParamId) {
        (self.proj_w, self.proj_b)
    }

    /// `M == C`: every channel feeds the gate.
    pub fn is_selective(&self) -> bool {
        self.m < self.channels
    }

    pub fn forward<S: Scalar>(&self, s: &Session<S>, f: &Var<S>) -> Result<(Var<S>, EfsTrace<S>)> {
        let chans = f.shape().get(1).copied().unwrap_or(0);
        if chans != self.channels {
            return Err(shape_err!("entropy gate built for {} channels, got {chans}", self.channels));
        }
        let scores = channel_entropy(f.value())?;
        let selections = scores
            .iter()
            .map(|sc| s.frozen_indices(|| sc.bottom_m(self.m)))
            .collect::<Result<Vec<_>>>()?;
        let (out, attention) =
            efs_spatial_attention(f, &selections, &s.param(self.proj_w), Some(&s.param(self.proj_b)))?;
        Ok((
            out,
            EfsTrace {
                scores,
                selections,
                attention: attention.value().clone(),
            },
        ))
    }
}
