use super::knn::PatchGraph;
use crate::error::{shape_err, Error, Result};
use crate::numerics::{conv2d_1x1, ops, Scalar, Tensor, Var};

fn check_graphs(shape: &[usize], graphs: &[PatchGraph]) -> Result<(usize, usize, usize)> {
    let &[batch, chans, n] = shape else {
        return Err(shape_err!("max_relative expects [B, C, N], got {:?}", shape));
    };
    if graphs.len() != batch {
        return Err(Error::Graph(format!("{} graphs for batch {batch}", graphs.len())));
    }
    for g in graphs {
        if g.n_nodes() != n {
            return Err(Error::Graph(format!("graph over {} nodes, features have {n}", g.n_nodes())));
        }
        if g.k_neighbors() == 0 {
            return Err(Error::Graph("empty neighbour row".into()));
        }
    }
    Ok((batch, chans, n))
}

/// For every `(b, c, i)`, the first neighbour `j ∈ N(i)` (in row order)
/// maximising `x[b, c, j]`.
pub fn neighbour_argmax<S: Scalar>(x: &Tensor<S>, graphs: &[PatchGraph]) -> Result<Vec<usize>> {
    let (_, chans, n) = check_graphs(x.shape(), graphs)?;
    let data = x.data();
    let mut arg = Vec::with_capacity(data.len());
    for (b, graph) in graphs.iter().enumerate() {
        for c in 0..chans {
            let row = &data[(b * chans + c) * n..(b * chans + c + 1) * n];
            for i in 0..n {
                let nbrs = graph.row(i);
                let mut best = nbrs[0];
                for &j in &nbrs[1..] {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                arg.push(best);
            }
        }
    }
    Ok(arg)
}

/// Max-relative aggregation `m_i = max_{j ∈ N(i)} (x_j − x_i)` per channel
/// over `x: [B, C, N]`, one graph per batch item. Parameter free; the
/// gradient follows the first maximising neighbour in row order.
pub fn max_relative<S: Scalar>(x: &Var<S>, graphs: &[PatchGraph]) -> Result<Var<S>> {
    let arg = neighbour_argmax(x.value(), graphs)?;
    max_relative_at(x, graphs, arg)
}

/// [`max_relative`] with the maximising neighbours supplied by the caller
/// (as returned by [`neighbour_argmax`]).
pub fn max_relative_at<S: Scalar>(x: &Var<S>, graphs: &[PatchGraph], arg: Vec<usize>) -> Result<Var<S>> {
    let (batch, chans, n) = check_graphs(x.shape(), graphs)?;
    if arg.len() != batch * chans * n || arg.iter().any(|&j| j >= n) {
        return Err(Error::Graph("neighbour argmax table does not fit the features".into()));
    }
    let data = x.data();
    let out: Vec<S> = (0..data.len())
        .map(|k| data[(k / n) * n + arg[k]] - data[k])
        .collect();
    let out = Tensor::new(x.shape(), out)?;
    Var::from_op("max_relative", out, &[x], move |g, _| {
        let mut gx = vec![S::zero(); g.len()];
        for (k, &gv) in g.iter().enumerate() {
            gx[(k / n) * n + arg[k]] += gv;
            gx[k] -= gv;
        }
        vec![Some(gx)]
    })
}

/// Max-relative graph convolution: `Update([x_i ; m_i])` with a learnable
/// `2C → C` pointwise projection (`weight: [C, 2C]`).
pub fn mrconv<S: Scalar>(
    x: &Var<S>,
    graphs: &[PatchGraph],
    weight: &Var<S>,
    bias: Option<&Var<S>>,
) -> Result<Var<S>> {
    let arg = neighbour_argmax(x.value(), graphs)?;
    mrconv_at(x, graphs, arg, weight, bias)
}

/// [`mrconv`] with a caller-supplied neighbour argmax table.
pub fn mrconv_at<S: Scalar>(
    x: &Var<S>,
    graphs: &[PatchGraph],
    arg: Vec<usize>,
    weight: &Var<S>,
    bias: Option<&Var<S>>,
) -> Result<Var<S>> {
    let agg = max_relative_at(x, graphs, arg)?;
    let joined = ops::concat_channels(&[x, &agg])?;
    conv2d_1x1(&joined, weight, bias)
}
