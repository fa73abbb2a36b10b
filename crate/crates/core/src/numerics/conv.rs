//! Convolutions: pointwise (1×1), general 2D (im2col + GEMM) and the
//! same-length 1D kernel used by node attention.

use super::autograd::Var;
use super::scalar::{gemm, Scalar};
use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

fn check_bias<S: Scalar>(bias: Option<&Var<S>>, c_out: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.value().len() != c_out {
            return Err(shape_err!("bias has {} entries, expected {c_out}", b.value().len()));
        }
    }
    Ok(())
}

fn bias_grad<S: Scalar>(g: &[S], batch: usize, c_out: usize, plane: usize) -> Vec<S> {
    let mut gb = vec![S::zero(); c_out];
    for b in 0..batch {
        for (o, acc) in gb.iter_mut().enumerate() {
            let s = (b * c_out + o) * plane;
            *acc += g[s..s + plane].iter().copied().sum::<S>();
        }
    }
    gb
}

/// Pointwise convolution over `[B, C_in, ...]` with `weight: [C_out, C_in]`.
pub fn conv2d_1x1<S: Scalar>(
    input: &Var<S>,
    weight: &Var<S>,
    bias: Option<&Var<S>>,
) -> Result<Var<S>> {
    let shape = input.shape();
    if shape.len() < 3 {
        return Err(shape_err!("conv2d_1x1: input rank {} < 3", shape.len()));
    }
    let (batch, c_in) = (shape[0], shape[1]);
    let plane: usize = shape[2..].iter().product();
    let &[c_out, w_in] = weight.shape() else {
        return Err(shape_err!("conv2d_1x1: weight must be 2-D, got {:?}", weight.shape()));
    };
    if w_in != c_in {
        return Err(shape_err!(
            "conv2d_1x1: weight expects {w_in} input channels, input has {c_in}"
        ));
    }
    check_bias(bias, c_out)?;

    let mut out = vec![S::zero(); batch * c_out * plane];
    for b in 0..batch {
        let x = &input.data()[b * c_in * plane..(b + 1) * c_in * plane];
        let y = &mut out[b * c_out * plane..(b + 1) * c_out * plane];
        gemm(c_out, c_in, plane, weight.data(), false, x, false, y, false);
        if let Some(bias) = bias {
            for (o, row) in y.chunks_mut(plane).enumerate() {
                let bv = bias.data()[o];
                row.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[1] = c_out;
    let out = Tensor::new(&out_shape, out)?;

    let (xc, wc) = (input.clone(), weight.clone());
    let mut parents = vec![input, weight];
    parents.extend(bias);
    let has_bias = bias.is_some();
    Var::from_op("conv2d_1x1", out, &parents, move |g, needs| {
        let mut gx = needs[0].then(|| vec![S::zero(); batch * c_in * plane]);
        let mut gw = needs[1].then(|| vec![S::zero(); c_out * c_in]);
        for b in 0..batch {
            let gy = &g[b * c_out * plane..(b + 1) * c_out * plane];
            if let Some(gx) = gx.as_mut() {
                let dst = &mut gx[b * c_in * plane..(b + 1) * c_in * plane];
                gemm(c_in, c_out, plane, wc.data(), true, gy, false, dst, false);
            }
            if let Some(gw) = gw.as_mut() {
                let x = &xc.data()[b * c_in * plane..(b + 1) * c_in * plane];
                gemm(c_out, plane, c_in, gy, false, x, true, gw, true);
            }
        }
        let mut grads = vec![gx, gw];
        if has_bias {
            grads.push(needs[2].then(|| bias_grad(g, batch, c_out, plane)));
        }
        grads
    })
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }

    /// Source pixel for output `(oh, ow)` and kernel tap `(ki, kj)`.
    fn source(&self, oh: usize, ow: usize, ki: usize, kj: usize) -> Option<(usize, usize)> {
        let y = (oh * self.stride + ki) as isize - self.pad as isize;
        let x = (ow * self.stride + kj) as isize - self.pad as isize;
        (y >= 0 && x >= 0 && (y as usize) < self.h && (x as usize) < self.w)
            .then_some((y as usize, x as usize))
    }

    fn im2col<S: Scalar>(&self, x: &[S], cols: &mut [S]) {
        let n = self.cols();
        for ci in 0..self.c_in {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for oh in 0..self.ho {
                        for ow in 0..self.wo {
                            dst[oh * self.wo + ow] = match self.source(oh, ow, ki, kj) {
                                Some((y, xx)) => x[(ci * self.h + y) * self.w + xx],
                                None => S::zero(),
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im<S: Scalar>(&self, cols: &[S], dx: &mut [S]) {
        let n = self.cols();
        for ci in 0..self.c_in {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * n..(row + 1) * n];
                    for oh in 0..self.ho {
                        for ow in 0..self.wo {
                            if let Some((y, xx)) = self.source(oh, ow, ki, kj) {
                                dx[(ci * self.h + y) * self.w + xx] += src[oh * self.wo + ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// General 2D convolution (cross-correlation) with square stride and zero
/// padding. `weight: [C_out, C_in, kh, kw]`.
pub fn conv2d<S: Scalar>(
    input: &Var<S>,
    weight: &Var<S>,
    bias: Option<&Var<S>>,
    stride: usize,
    pad: usize,
) -> Result<Var<S>> {
    let (batch, c_in, h, w) = input.value().dims4()?;
    let &[c_out, w_in, kh, kw] = weight.shape() else {
        return Err(shape_err!("conv2d: weight must be 4-D, got {:?}", weight.shape()));
    };
    if w_in != c_in {
        return Err(shape_err!("conv2d: weight expects {w_in} channels, input has {c_in}"));
    }
    if stride == 0 {
        return Err(Error::Config("conv2d: stride must be positive".into()));
    }
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return Err(shape_err!("conv2d: kernel {kh}×{kw} larger than padded input {h}×{w}"));
    }
    check_bias(bias, c_out)?;
    let geo = Geometry {
        c_in,
        h,
        w,
        kh,
        kw,
        stride,
        pad,
        ho: (h + 2 * pad - kh) / stride + 1,
        wo: (w + 2 * pad - kw) / stride + 1,
    };
    let (rows, plane) = (geo.rows(), geo.cols());
    let mut cols = vec![S::zero(); batch * rows * plane];
    let mut out = vec![S::zero(); batch * c_out * plane];
    for b in 0..batch {
        let x = &input.data()[b * c_in * h * w..(b + 1) * c_in * h * w];
        let col = &mut cols[b * rows * plane..(b + 1) * rows * plane];
        geo.im2col(x, col);
        let y = &mut out[b * c_out * plane..(b + 1) * c_out * plane];
        gemm(c_out, rows, plane, weight.data(), false, col, false, y, false);
        if let Some(bias) = bias {
            for (o, row) in y.chunks_mut(plane).enumerate() {
                let bv = bias.data()[o];
                row.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    let out = Tensor::new(&[batch, c_out, geo.ho, geo.wo], out)?;

    let wc = weight.clone();
    let mut parents = vec![input, weight];
    parents.extend(bias);
    let has_bias = bias.is_some();
    Var::from_op("conv2d", out, &parents, move |g, needs| {
        let mut gx = needs[0].then(|| vec![S::zero(); batch * c_in * h * w]);
        let mut gw = needs[1].then(|| vec![S::zero(); c_out * rows]);
        let mut dcol = vec![S::zero(); if needs[0] { rows * plane } else { 0 }];
        for b in 0..batch {
            let gy = &g[b * c_out * plane..(b + 1) * c_out * plane];
            if let Some(gw) = gw.as_mut() {
                let col = &cols[b * rows * plane..(b + 1) * rows * plane];
                gemm(c_out, plane, rows, gy, false, col, true, gw, true);
            }
            if let Some(gx) = gx.as_mut() {
                gemm(rows, c_out, plane, wc.data(), true, gy, false, &mut dcol, false);
                geo.col2im(&dcol, &mut gx[b * c_in * h * w..(b + 1) * c_in * h * w]);
            }
        }
        let mut grads = vec![gx, gw];
        if has_bias {
            grads.push(needs[2].then(|| bias_grad(g, batch, c_out, plane)));
        }
        grads
    })
}

/// Same-length 1D cross-correlation of `[B, 1, L]` with an odd-width kernel
/// `[1, 1, k]`, zero padded by `(k-1)/2` on both ends.
pub fn conv1d<S: Scalar>(input: &Var<S>, weight: &Var<S>) -> Result<Var<S>> {
    let &[batch, 1, len] = input.shape() else {
        return Err(shape_err!("conv1d: input must be [B,1,L], got {:?}", input.shape()));
    };
    let &[1, 1, k] = weight.shape() else {
        return Err(shape_err!("conv1d: weight must be [1,1,k], got {:?}", weight.shape()));
    };
    if k % 2 == 0 {
        return Err(Error::Config(format!("conv1d kernel width must be odd, got {k}")));
    }
    let pad = (k - 1) / 2;
    let tap = move |l: usize, t: usize| -> Option<usize> {
        let src = (l + t) as isize - pad as isize;
        (src >= 0 && (src as usize) < len).then_some(src as usize)
    };
    let (x, wt) = (input.data(), weight.data());
    let mut out = vec![S::zero(); batch * len];
    for b in 0..batch {
        for l in 0..len {
            let mut acc = S::zero();
            for (t, &wv) in wt.iter().enumerate() {
                if let Some(src) = tap(l, t) {
                    acc += wv * x[b * len + src];
                }
            }
            out[b * len + l] = acc;
        }
    }
    let out = Tensor::new(&[batch, 1, len], out)?;
    let (xc, wc) = (input.clone(), weight.clone());
    Var::from_op("conv1d", out, &[input, weight], move |g, needs| {
        let mut gx = needs[0].then(|| vec![S::zero(); batch * len]);
        let mut gw = needs[1].then(|| vec![S::zero(); k]);
        for b in 0..batch {
            for l in 0..len {
                let gv = g[b * len + l];
                for t in 0..k {
                    if let Some(src) = tap(l, t) {
                        if let Some(gx) = gx.as_mut() {
                            gx[b * len + src] += gv * wc.data()[t];
                        }
                        if let Some(gw) = gw.as_mut() {
                            gw[t] += gv * xc.data()[b * len + src];
                        }
                    }
                }
            }
        }
        vec![gx, gw]
    })
}
