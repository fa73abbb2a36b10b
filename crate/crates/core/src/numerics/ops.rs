//! Elementwise, reduction and indexing ops on [`Var`].

use super::autograd::Var;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

fn same_shape<S: Scalar>(op: &str, a: &Var<S>, b: &Var<S>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err!(
            "{op}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}

fn zip_map<S: Scalar>(a: &[S], b: &[S], f: impl Fn(S, S) -> S) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

pub fn add<S: Scalar>(a: &Var<S>, b: &Var<S>) -> Result<Var<S>> {
    same_shape("add", a, b)?;
    let out = Tensor::new(a.shape(), zip_map(a.data(), b.data(), |x, y| x + y))?;
    Var::from_op("add", out, &[a, b], |g, _| vec![Some(g.to_vec()), Some(g.to_vec())])
}

pub fn sub<S: Scalar>(a: &Var<S>, b: &Var<S>) -> Result<Var<S>> {
    same_shape("sub", a, b)?;
    let out = Tensor::new(a.shape(), zip_map(a.data(), b.data(), |x, y| x - y))?;
    Var::from_op("sub", out, &[a, b], |g, _| {
        vec![Some(g.to_vec()), Some(g.iter().map(|&v| -v).collect())]
    })
}

pub fn mul<S: Scalar>(a: &Var<S>, b: &Var<S>) -> Result<Var<S>> {
    same_shape("mul", a, b)?;
    let out = Tensor::new(a.shape(), zip_map(a.data(), b.data(), |x, y| x * y))?;
    let (ac, bc) = (a.clone(), b.clone());
    Var::from_op("mul", out, &[a, b], move |g, needs| {
        vec![
            needs[0].then(|| zip_map(g, bc.data(), |g, y| g * y)),
            needs[1].then(|| zip_map(g, ac.data(), |g, x| g * x)),
        ]
    })
}

pub fn scale<S: Scalar>(a: &Var<S>, factor: S) -> Result<Var<S>> {
    let out = a.value().map(|v| v * factor);
    Var::from_op("scale", out, &[a], move |g, _| {
        vec![Some(g.iter().map(|&v| v * factor).collect())]
    })
}

pub fn relu<S: Scalar>(a: &Var<S>) -> Result<Var<S>> {
    let out = a.value().map(|v| if v > S::zero() { v } else { S::zero() });
    let ac = a.clone();
    Var::from_op("relu", out, &[a], move |g, _| {
        vec![Some(zip_map(g, ac.data(), |g, x| {
            if x > S::zero() {
                g
            } else {
                S::zero()
            }
        }))]
    })
}

/// Logistic function evaluated without overflow for large |x|.
pub fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub fn sigmoid<S: Scalar>(a: &Var<S>) -> Result<Var<S>> {
    let out = a.value().map(sigmoid_scalar);
    let y = out.data().to_vec();
    Var::from_op("sigmoid", out, &[a], move |g, _| {
        vec![Some(zip_map(g, &y, |g, y| g * y * (S::one() - y)))]
    })
}

/// Sum of all elements as a one-element tensor.
pub fn sum<S: Scalar>(a: &Var<S>) -> Result<Var<S>> {
    let total = a.data().iter().copied().sum::<S>();
    let n = a.value().len();
    Var::from_op("sum", Tensor::scalar(total), &[a], move |g, _| {
        vec![Some(vec![g[0]; n])]
    })
}

pub fn mean<S: Scalar>(a: &Var<S>) -> Result<Var<S>> {
    let n = S::lit(a.value().len() as f64);
    scale(&sum(a)?, S::one() / n)
}

pub fn reshape<S: Scalar>(a: &Var<S>, shape: &[usize]) -> Result<Var<S>> {
    let out = a.value().clone().reshape(shape)?;
    Var::from_op("reshape", out, &[a], |g, _| vec![Some(g.to_vec())])
}

/// Sum of a list of same-shape values.
pub fn add_all<S: Scalar>(terms: &[Var<S>]) -> Result<Var<S>> {
    let (first, rest) = terms
        .split_first()
        .ok_or_else(|| Error::Shape("add_all: empty term list".into()))?;
    rest.iter().try_fold(first.clone(), |acc, t| add(&acc, t))
}

/// `(batch, channels, rest)` split of a tensor whose axis 1 is the channel axis.
fn channel_split(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(shape_err!("expected at least rank 2, got {:?}", shape));
    }
    Ok((shape[0], shape[1], shape[2..].iter().product()))
}

/// Concatenates along axis 1. All inputs share every other extent.
pub fn concat_channels<S: Scalar>(parts: &[&Var<S>]) -> Result<Var<S>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("concat: no inputs".into()))?;
    let (batch, _, rest) = channel_split(first.shape())?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (b, c, r) = channel_split(p.shape())?;
        if b != batch || r != rest || p.shape()[2..] != first.shape()[2..] {
            return Err(shape_err!(
                "concat: incompatible shapes {:?} and {:?}",
                first.shape(),
                p.shape()
            ));
        }
        widths.push(c);
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(batch * total * rest);
    for b in 0..batch {
        for (p, &c) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[b * c * rest..(b + 1) * c * rest]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[1] = total;
    let out = Tensor::new(&shape, data)?;
    Var::from_op("concat", out, parts, move |g, needs| {
        let mut grads: Vec<Option<Vec<S>>> = widths
            .iter()
            .zip(needs)
            .map(|(&c, &n)| n.then(|| Vec::with_capacity(batch * c * rest)))
            .collect();
        for b in 0..batch {
            let mut off = b * total * rest;
            for (gp, &c) in grads.iter_mut().zip(&widths) {
                if let Some(gp) = gp {
                    gp.extend_from_slice(&g[off..off + c * rest]);
                }
                off += c * rest;
            }
        }
        grads
    })
}

/// Channels `[start, end)` of axis 1.
pub fn slice_channels<S: Scalar>(a: &Var<S>, start: usize, end: usize) -> Result<Var<S>> {
    let (batch, chans, rest) = channel_split(a.shape())?;
    if start >= end || end > chans {
        return Err(shape_err!("slice [{start},{end}) out of range for {chans} channels"));
    }
    let width = end - start;
    let mut data = Vec::with_capacity(batch * width * rest);
    for b in 0..batch {
        let base = b * chans * rest;
        data.extend_from_slice(&a.data()[base + start * rest..base + end * rest]);
    }
    let mut shape = a.shape().to_vec();
    shape[1] = width;
    let out = Tensor::new(&shape, data)?;
    Var::from_op("slice_channels", out, &[a], move |g, _| {
        let mut ga = vec![S::zero(); batch * chans * rest];
        for b in 0..batch {
            let dst = b * chans * rest + start * rest;
            ga[dst..dst + width * rest]
                .copy_from_slice(&g[b * width * rest..(b + 1) * width * rest]);
        }
        vec![Some(ga)]
    })
}

/// Gathers, per batch item, the listed channels in the listed order.
/// Indices are constants of the backward pass.
pub fn gather_channels<S: Scalar>(a: &Var<S>, indices: &[Vec<usize>]) -> Result<Var<S>> {
    let (batch, chans, rest) = channel_split(a.shape())?;
    if indices.len() != batch {
        return Err(shape_err!("gather: {} index lists for batch {}", indices.len(), batch));
    }
    let width = indices[0].len();
    if width == 0 || indices.iter().any(|ix| ix.len() != width || ix.iter().any(|&c| c >= chans)) {
        return Err(shape_err!("gather: ragged or out-of-range channel indices"));
    }
    let mut data = Vec::with_capacity(batch * width * rest);
    for (b, ix) in indices.iter().enumerate() {
        for &c in ix {
            let src = (b * chans + c) * rest;
            data.extend_from_slice(&a.data()[src..src + rest]);
        }
    }
    let mut shape = a.shape().to_vec();
    shape[1] = width;
    let out = Tensor::new(&shape, data)?;
    let indices = indices.to_vec();
    Var::from_op("gather_channels", out, &[a], move |g, _| {
        let mut ga = vec![S::zero(); batch * chans * rest];
        for (b, ix) in indices.iter().enumerate() {
            for (j, &c) in ix.iter().enumerate() {
                let dst = (b * chans + c) * rest;
                let src = (b * width + j) * rest;
                ga[dst..dst + rest]
                    .iter_mut()
                    .zip(&g[src..src + rest])
                    .for_each(|(d, &v)| *d += v);
            }
        }
        vec![Some(ga)]
    })
}

/// Multiplies `x: [B, C, ...]` by a per-position gate `gate: [B, 1, ...]`
/// broadcast across channels.
pub fn mul_gate<S: Scalar>(x: &Var<S>, gate: &Var<S>) -> Result<Var<S>> {
    let (batch, chans, rest) = channel_split(x.shape())?;
    let (gb, gc, gr) = channel_split(gate.shape())?;
    if gb != batch || gc != 1 || gr != rest || gate.shape()[2..] != x.shape()[2..] {
        return Err(shape_err!(
            "mul_gate: gate {:?} does not broadcast over {:?}",
            gate.shape(),
            x.shape()
        ));
    }
    let mut data = Vec::with_capacity(x.value().len());
    for b in 0..batch {
        let gs = &gate.data()[b * rest..(b + 1) * rest];
        for c in 0..chans {
            let xs = &x.data()[(b * chans + c) * rest..(b * chans + c + 1) * rest];
            data.extend(xs.iter().zip(gs).map(|(&v, &a)| v * a));
        }
    }
    let out = Tensor::new(x.shape(), data)?;
    let (xc, gc) = (x.clone(), gate.clone());
    Var::from_op("mul_gate", out, &[x, gate], move |g, needs| {
        let mut gx = needs[0].then(|| vec![S::zero(); batch * chans * rest]);
        let mut gg = needs[1].then(|| vec![S::zero(); batch * rest]);
        for b in 0..batch {
            let gs = &gc.data()[b * rest..(b + 1) * rest];
            for c in 0..chans {
                let o = (b * chans + c) * rest;
                let gy = &g[o..o + rest];
                if let Some(gx) = gx.as_mut() {
                    gx[o..o + rest]
                        .iter_mut()
                        .zip(gy.iter().zip(gs))
                        .for_each(|(d, (&gv, &a))| *d = gv * a);
                }
                if let Some(gg) = gg.as_mut() {
                    let xs = &xc.data()[o..o + rest];
                    gg[b * rest..(b + 1) * rest]
                        .iter_mut()
                        .zip(gy.iter().zip(xs))
                        .for_each(|(d, (&gv, &v))| *d += gv * v);
                }
            }
        }
        vec![gx, gg]
    })
}

/// Adds `table` to every batch item of `x`; `table` has the shape of one item.
pub fn add_per_item<S: Scalar>(x: &Var<S>, table: &Var<S>) -> Result<Var<S>> {
    let batch = x.shape()[0];
    let per = x.value().len() / batch;
    if table.value().len() != per || table.shape() != &x.shape()[1..] {
        return Err(shape_err!(
            "add_per_item: table {:?} does not match item shape {:?}",
            table.shape(),
            &x.shape()[1..]
        ));
    }
    let t = table.data();
    let data: Vec<S> = x
        .data()
        .chunks(per)
        .flat_map(|item| item.iter().zip(t).map(|(&a, &b)| a + b))
        .collect();
    let out = Tensor::new(x.shape(), data)?;
    Var::from_op("add_per_item", out, &[x, table], move |g, needs| {
        let gt = needs[1].then(|| {
            let mut acc = vec![S::zero(); per];
            for item in g.chunks(per) {
                acc.iter_mut().zip(item).for_each(|(a, &v)| *a += v);
            }
            acc
        });
        vec![needs[0].then(|| g.to_vec()), gt]
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Avg,
    Max,
}

/// Global average or max pooling over one axis; the reduced axis keeps
/// extent 1. Max routes its gradient to the first maximal element in scan
/// order.
pub fn pool_global<S: Scalar>(a: &Var<S>, axis: usize, kind: PoolKind) -> Result<Var<S>> {
    match kind {
        PoolKind::Avg => pool_avg(a, axis),
        PoolKind::Max => pool_max_at(a, axis, argmax_along(a.value(), axis)?),
    }
}

fn pool_geometry(shape: &[usize], axis: usize) -> Result<(usize, usize, usize, Vec<usize>)> {
    if axis >= shape.len() {
        return Err(shape_err!("pool axis {axis} out of range for {:?}", shape));
    }
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out_shape = shape.to_vec();
    out_shape[axis] = 1;
    Ok((outer, shape[axis], inner, out_shape))
}

fn pool_avg<S: Scalar>(a: &Var<S>, axis: usize) -> Result<Var<S>> {
    let (outer, n, inner, out_shape) = pool_geometry(a.shape(), axis)?;
    let x = a.data();
    let mut data = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let s = (0..n).map(|j| x[(o * n + j) * inner + i]).sum::<S>();
            data.push(s / S::lit(n as f64));
        }
    }
    let out = Tensor::new(&out_shape, data)?;
    let total = a.value().len();
    Var::from_op("pool_avg", out, &[a], move |g, _| {
        let mut ga = vec![S::zero(); total];
        for o in 0..outer {
            for i in 0..inner {
                let share = g[o * inner + i] / S::lit(n as f64);
                for j in 0..n {
                    ga[(o * n + j) * inner + i] += share;
                }
            }
        }
        vec![Some(ga)]
    })
}

/// Position of the first maximum along `axis`, for every other index.
pub fn argmax_along<S: Scalar>(x: &Tensor<S>, axis: usize) -> Result<Vec<usize>> {
    let (outer, n, inner, _) = pool_geometry(x.shape(), axis)?;
    let x = x.data();
    let mut arg = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| x[(o * n + j) * inner + i];
            let mut best = 0;
            for j in 1..n {
                if at(j) > at(best) {
                    best = j;
                }
            }
            arg.push(best);
        }
    }
    Ok(arg)
}

/// Max pooling that reads the element chosen by `argmax` (as produced by
/// [`argmax_along`]) rather than searching.
pub fn pool_max_at<S: Scalar>(a: &Var<S>, axis: usize, argmax: Vec<usize>) -> Result<Var<S>> {
    let (outer, n, inner, out_shape) = pool_geometry(a.shape(), axis)?;
    if argmax.len() != outer * inner || argmax.iter().any(|&j| j >= n) {
        return Err(shape_err!("argmax table does not fit {:?} along axis {axis}", a.shape()));
    }
    let x = a.data();
    let data = (0..outer * inner)
        .map(|k| x[((k / inner) * n + argmax[k]) * inner + k % inner])
        .collect();
    let out = Tensor::new(&out_shape, data)?;
    let total = a.value().len();
    Var::from_op("pool_max", out, &[a], move |g, _| {
        let mut ga = vec![S::zero(); total];
        for (k, &gv) in g.iter().enumerate() {
            ga[((k / inner) * n + argmax[k]) * inner + k % inner] += gv;
        }
        vec![Some(ga)]
    })
}

/// ReLU with a fixed on/off pattern (`pass[i] != 0` lets element `i` through).
pub fn relu_pattern<S: Scalar>(a: &Var<S>, pass: &[usize]) -> Result<Var<S>> {
    if pass.len() != a.value().len() {
        return Err(shape_err!("relu pattern of {} for {} elements", pass.len(), a.value().len()));
    }
    let data = a
        .data()
        .iter()
        .zip(pass)
        .map(|(&v, &p)| if p != 0 { v } else { S::zero() })
        .collect();
    let out = Tensor::new(a.shape(), data)?;
    let pass = pass.to_vec();
    Var::from_op("relu", out, &[a], move |g, _| {
        vec![Some(
            g.iter()
                .zip(&pass)
                .map(|(&gv, &p)| if p != 0 { gv } else { S::zero() })
                .collect(),
        )]
    })
}
