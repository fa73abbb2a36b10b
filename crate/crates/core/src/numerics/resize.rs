//! Bilinear resampling with half-pixel centers (align-corners = false).

use super::autograd::Var;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{shape_err, Result};

#[derive(Clone, Copy, Debug)]
struct Tap<S> {
    lo: usize,
    hi: usize,
    w_lo: S,
    w_hi: S,
}

fn taps<S: Scalar>(src: usize, dst: usize) -> Vec<Tap<S>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let pos = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = if lo + 1 < src { lo + 1 } else { lo };
            let frac = pos - lo as f64;
            Tap {
                lo,
                hi,
                w_lo: S::lit(1.0 - frac),
                w_hi: S::lit(frac),
            }
        })
        .collect()
}

struct Plan<S> {
    rows: Vec<Tap<S>>,
    cols: Vec<Tap<S>>,
    w: usize,
}

impl<S: Scalar> Plan<S> {
    fn new(h: usize, w: usize, th: usize, tw: usize) -> Self {
        Self {
            rows: taps(h, th),
            cols: taps(w, tw),
            w,
        }
    }

    fn forward(&self, src: &[S], dst: &mut [S]) {
        let tw = self.cols.len();
        for (oy, ry) in self.rows.iter().enumerate() {
            let top = &src[ry.lo * self.w..(ry.lo + 1) * self.w];
            let bot = &src[ry.hi * self.w..(ry.hi + 1) * self.w];
            for (ox, cx) in self.cols.iter().enumerate() {
                let t = cx.w_lo * top[cx.lo] + cx.w_hi * top[cx.hi];
                let b = cx.w_lo * bot[cx.lo] + cx.w_hi * bot[cx.hi];
                dst[oy * tw + ox] = ry.w_lo * t + ry.w_hi * b;
            }
        }
    }

    fn backward(&self, g: &[S], dsrc: &mut [S]) {
        let tw = self.cols.len();
        for (oy, ry) in self.rows.iter().enumerate() {
            for (ox, cx) in self.cols.iter().enumerate() {
                let gv = g[oy * tw + ox];
                dsrc[ry.lo * self.w + cx.lo] += gv * ry.w_lo * cx.w_lo;
                dsrc[ry.lo * self.w + cx.hi] += gv * ry.w_lo * cx.w_hi;
                dsrc[ry.hi * self.w + cx.lo] += gv * ry.w_hi * cx.w_lo;
                dsrc[ry.hi * self.w + cx.hi] += gv * ry.w_hi * cx.w_hi;
            }
        }
    }
}

fn planes(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(shape_err!("resize needs at least rank 2, got {:?}", shape));
    }
    let n = shape.len();
    Ok((shape[..n - 2].iter().product(), shape[n - 2], shape[n - 1]))
}

/// Resizes the last two axes of a plain tensor.
pub fn resize_tensor<S: Scalar>(input: &Tensor<S>, target: (usize, usize)) -> Result<Tensor<S>> {
    let (count, h, w) = planes(input.shape())?;
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(shape_err!("resize target must be positive, got {th}×{tw}"));
    }
    if (th, tw) == (h, w) {
        return Ok(input.clone());
    }
    let plan = Plan::new(h, w, th, tw);
    let mut out = vec![S::zero(); count * th * tw];
    for p in 0..count {
        plan.forward(
            &input.data()[p * h * w..(p + 1) * h * w],
            &mut out[p * th * tw..(p + 1) * th * tw],
        );
    }
    let mut shape = input.shape().to_vec();
    let n = shape.len();
    shape[n - 2] = th;
    shape[n - 1] = tw;
    Tensor::new(&shape, out)
}

/// Differentiable bilinear resize of the last two axes. When the target
/// equals the source resolution the input is passed through unchanged.
pub fn bilinear_resize<S: Scalar>(input: &Var<S>, target: (usize, usize)) -> Result<Var<S>> {
    let (count, h, w) = planes(input.shape())?;
    let (th, tw) = target;
    if (th, tw) == (h, w) {
        // Resolution fix: no resampling, bit-identical passthrough.
        return Ok(input.clone());
    }
    let out = resize_tensor(input.value(), target)?;
    let plan = Plan::new(h, w, th, tw);
    Var::from_op("bilinear_resize", out, &[input], move |g, _| {
        let mut gx = vec![S::zero(); count * h * w];
        for p in 0..count {
            plan.backward(
                &g[p * th * tw..(p + 1) * th * tw],
                &mut gx[p * h * w..(p + 1) * h * w],
            );
        }
        vec![Some(gx)]
    })
}
