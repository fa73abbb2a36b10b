//! Deep-supervision objective: weighted IoU + weighted BCE on region maps,
//! plain BCE on boundary maps, summed over all decoder stages.

use crate::error::{shape_err, Error, Result};
use crate::numerics::{ops, Scalar, Tensor, Var};
use crate::skipnet::DeepOutputs;

/// Probability clamp applied before any logarithm.
pub const PROB_CLAMP: f64 = 1e-7;
/// Additive smoothing of the weighted IoU ratio.
pub const IOU_SMOOTH: f64 = 1.0;
/// Side of the square window behind the pixel weight map.
pub const WEIGHT_WINDOW: usize = 31;

/// Ground truth for one batch, all `[B, 1, H, W]`.
#[derive(Clone, Debug)]
pub struct SupervisionTargets<S> {
    pub region: Tensor<S>,
    pub boundary: Tensor<S>,
    pub weight: Tensor<S>,
}

impl<S: Scalar> SupervisionTargets<S> {
    /// Derives boundary and weight maps from a binary region mask.
    pub fn from_mask(region: Tensor<S>) -> Result<Self> {
        let boundary = boundary_from_mask(&region)?;
        let weight = weight_map(&region)?;
        Ok(Self {
            region,
            boundary,
            weight,
        })
    }
}

/// Loss components summed over the four stages.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub iou: f64,
    pub bce: f64,
    pub boundary: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.iou + self.bce + self.boundary
    }
}

fn mask_dims<S: Scalar>(mask: &Tensor<S>) -> Result<(usize, usize, usize)> {
    let (b, c, h, w) = mask.dims4()?;
    if c != 1 {
        return Err(shape_err!("masks must have one channel, got {c}"));
    }
    Ok((b, h, w))
}

fn check_binary<S: Scalar>(mask: &Tensor<S>) -> Result<()> {
    match mask.data().iter().position(|&v| v != S::zero() && v != S::one()) {
        Some(i) => Err(Error::Validation(format!(
            "mask value {} at flat index {i} is not binary",
            mask.data()[i].as_f64()
        ))),
        None => Ok(()),
    }
}

/// Mirror index without repeating the edge sample (`-1 → 1`, `n → n-2`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

/// Pixels where the 3×3 Sobel gradient magnitude of the mask is nonzero.
pub fn boundary_from_mask<S: Scalar>(mask: &Tensor<S>) -> Result<Tensor<S>> {
    let (batch, h, w) = mask_dims(mask)?;
    check_binary(mask)?;
    let mut out = Tensor::zeros(mask.shape())?;
    for b in 0..batch {
        let src = mask.item_slice(b);
        let at = |y: isize, x: isize| -> i32 { (src[reflect(y, h) * w + reflect(x, w)] == S::one()) as i32 };
        let dst = &mut out.data_mut()[b * h * w..(b + 1) * h * w];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1))
                    - (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
                let gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1))
                    - (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
                if gx != 0 || gy != 0 {
                    dst[y as usize * w + x as usize] = S::one();
                }
            }
        }
    }
    Ok(out)
}

/// `ω = 1 + 5·|avg₃₁(R) − R|`, the window average taken over in-bounds pixels only.
pub fn weight_map<S: Scalar>(mask: &Tensor<S>) -> Result<Tensor<S>> {
    let (batch, h, w) = mask_dims(mask)?;
    check_binary(mask)?;
    let r = WEIGHT_WINDOW / 2;
    let mut out = Tensor::zeros(mask.shape())?;
    let mut integral = vec![0u32; (h + 1) * (w + 1)];
    for b in 0..batch {
        let src = mask.item_slice(b);
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += (src[y * w + x] == S::one()) as u32;
                integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
            }
        }
        let dst = &mut out.data_mut()[b * h * w..(b + 1) * h * w];
        for y in 0..h {
            let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
            for x in 0..w {
                let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
                let ones = integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
                    - integral[y0 * (w + 1) + x1]
                    - integral[y1 * (w + 1) + x0];
                let avg = ones as f64 / ((y1 - y0) * (x1 - x0)) as f64;
                let v = src[y * w + x].as_f64();
                dst[y * w + x] = S::lit(1.0 + 5.0 * (avg - v).abs());
            }
        }
    }
    Ok(out)
}

fn check_pair<S: Scalar>(pred: &Var<S>, target: &Tensor<S>, weight: &Tensor<S>) -> Result<(usize, usize)> {
    if pred.shape() != target.shape() || pred.shape() != weight.shape() {
        return Err(shape_err!(
            "prediction {:?}, target {:?} and weight {:?} must agree",
            pred.shape(),
            target.shape(),
            weight.shape()
        ));
    }
    let batch = pred.shape().first().copied().unwrap_or(1);
    Ok((batch, pred.value().len() / batch))
}

/// Per-image `Σω·BCE / Σω`, averaged over the batch. Probabilities are
/// clamped to `[1e-7, 1-1e-7]`; clamped pixels pass no gradient.
pub fn weighted_bce<S: Scalar>(pred: &Var<S>, target: &Tensor<S>, weight: &Tensor<S>) -> Result<Var<S>> {
    let (batch, plane) = check_pair(pred, target, weight)?;
    let (p, t, w) = (pred.data(), target.data(), weight.data());
    let lo = PROB_CLAMP;
    let hi = 1.0 - PROB_CLAMP;
    let mut total = 0.0;
    let mut wsums = Vec::with_capacity(batch);
    for b in 0..batch {
        let (mut num, mut den) = (0.0, 0.0);
        for i in b * plane..(b + 1) * plane {
            let q = p[i].as_f64().clamp(lo, hi);
            let (tv, wv) = (t[i].as_f64(), w[i].as_f64());
            num += wv * (-tv * q.ln() - (1.0 - tv) * (1.0 - q).ln());
            den += wv;
        }
        total += num / den;
        wsums.push(den);
    }
    let value = Tensor::scalar(S::lit(total / batch as f64));
    let (t, w) = (target.clone(), weight.clone());
    let p = pred.value().clone();
    Var::from_op("weighted_bce", value, &[pred], move |g, _| {
        let g = g[0].as_f64() / batch as f64;
        let mut dp = vec![S::zero(); p.len()];
        for (i, d) in dp.iter_mut().enumerate() {
            let q = p.data()[i].as_f64();
            if q < lo || q > hi {
                continue;
            }
            let (tv, wv) = (t.data()[i].as_f64(), w.data()[i].as_f64());
            let dq = -tv / q + (1.0 - tv) / (1.0 - q);
            *d = S::lit(g * wv * dq / wsums[i / plane]);
        }
        vec![Some(dp)]
    })
}

/// Unweighted per-image BCE averaged over the batch.
pub fn bce<S: Scalar>(pred: &Var<S>, target: &Tensor<S>) -> Result<Var<S>> {
    weighted_bce(pred, target, &Tensor::full(target.shape(), S::one())?)
}

/// Per-image `1 − (Σω·P·R + ε) / (Σω·(P + R − P·R) + ε)`, averaged over the batch.
pub fn weighted_iou<S: Scalar>(pred: &Var<S>, target: &Tensor<S>, weight: &Tensor<S>) -> Result<Var<S>> {
    let (batch, plane) = check_pair(pred, target, weight)?;
    let (p, t, w) = (pred.data(), target.data(), weight.data());
    let mut parts = Vec::with_capacity(batch);
    let mut total = 0.0;
    for b in 0..batch {
        let (mut inter, mut union) = (IOU_SMOOTH, IOU_SMOOTH);
        for i in b * plane..(b + 1) * plane {
            let (pv, tv, wv) = (p[i].as_f64(), t[i].as_f64(), w[i].as_f64());
            inter += wv * pv * tv;
            union += wv * (pv + tv - pv * tv);
        }
        total += 1.0 - inter / union;
        parts.push((inter, union));
    }
    let value = Tensor::scalar(S::lit(total / batch as f64));
    let (t, w) = (target.clone(), weight.clone());
    Var::from_op("weighted_iou", value, &[pred], move |g, _| {
        let g = g[0].as_f64() / batch as f64;
        let dp = (0..t.len())
            .map(|i| {
                let (inter, union) = parts[i / plane];
                let (tv, wv) = (t.data()[i].as_f64(), w.data()[i].as_f64());
                let d = -(wv * tv * union - inter * wv * (1.0 - tv)) / (union * union);
                S::lit(g * d)
            })
            .collect();
        vec![Some(dp)]
    })
}

/// Sum over the four stages of region IoU + region BCE + boundary BCE.
pub fn total_loss<S: Scalar>(
    outputs: &DeepOutputs<S>,
    targets: &SupervisionTargets<S>,
) -> Result<(Var<S>, LossBreakdown)> {
    let mut terms = Vec::with_capacity(12);
    let mut parts = LossBreakdown::default();
    for (region, boundary) in outputs.region.iter().zip(&outputs.boundary) {
        let iou = weighted_iou(region, &targets.region, &targets.weight)?;
        let wbce = weighted_bce(region, &targets.region, &targets.weight)?;
        let edge = bce(boundary, &targets.boundary)?;
        parts.iou += iou.value().item().as_f64();
        parts.bce += wbce.value().item().as_f64();
        parts.boundary += edge.value().item().as_f64();
        terms.extend([iou, wbce, edge]);
    }
    Ok((ops::add_all(&terms)?, parts))
}
