use rand::Rng;

use super::attention::node_attention_at;
use super::knn::{knn_from_slice, PatchGraph};
use super::mrconv::{mrconv_at, neighbour_argmax};
use crate::error::{shape_err, Error, Result};
use crate::numerics::{
    bilinear_resize, conv2d_1x1, ops, params::kaiming_uniform, BatchNormIds, ParamId, ParamStore, Scalar,
    Session, Tensor, Var,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GnnBlockConfig {
    pub channels: usize,
    /// Grid the positional table is laid out on.
    pub grid: (usize, usize),
    pub k_neighbors: usize,
    pub dilation: usize,
    /// Width of the node-attention 1D kernel.
    pub kernel: usize,
    pub node_attention: bool,
    pub ffn_hidden: usize,
}

/// One attentional graph block: pointwise conv + BN, flatten, positional
/// table, dilated KNN graph, max-relative graph conv, node attention,
/// pointwise conv + BN and a residual two-layer feed-forward network.
#[derive(Clone, Debug)]
pub struct GnnBlock {
    cfg: GnnBlockConfig,
    pre_conv: ParamId,
    pre_bn: BatchNormIds,
    position: ParamId,
    update_w: ParamId,
    update_b: ParamId,
    attention: Option<ParamId>,
    post_conv: ParamId,
    post_bn: BatchNormIds,
    ffn_in: ParamId,
    ffn_in_bn: BatchNormIds,
    ffn_out: ParamId,
    ffn_out_bn: BatchNormIds,
}

/// Intermediate values of one block evaluation.
#[derive(Clone, Debug)]
pub struct BlockTrace<S> {
    /// Node features the graph was built from, `[B, C, N]`.
    pub embedded: Tensor<S>,
    pub graphs: Vec<PatchGraph>,
    /// Refined graph features entering the feed-forward residual, `[B, C, H, W]`.
    pub refined: Tensor<S>,
}

impl GnnBlock {
    pub fn register<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        cfg: GnnBlockConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let c = cfg.channels;
        let h = cfg.ffn_hidden;
        if cfg.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("node-attention kernel must be odd, got {}", cfg.kernel)));
        }
        let pre_conv = store.register(format!("{prefix}.pre.weight"), kaiming_uniform(&[c, c], c, rng)?)?;
        let pre_bn = BatchNormIds::register(store, &format!("{prefix}.pre.bn"), c)?;
        let position = store.register(
            format!("{prefix}.position"),
            Tensor::zeros(&[c, cfg.grid.0, cfg.grid.1])?,
        )?;
        let update_w = store.register(format!("{prefix}.update.weight"), kaiming_uniform(&[c, 2 * c], 2 * c, rng)?)?;
        let update_b = store.register(format!("{prefix}.update.bias"), Tensor::zeros(&[c])?)?;
        let attention = if cfg.node_attention {
            Some(store.register(
                format!("{prefix}.node_attention.weight"),
                kaiming_uniform(&[1, 1, cfg.kernel], cfg.kernel, rng)?,
            )?)
        } else {
            None
        };
        let post_conv = store.register(format!("{prefix}.post.weight"), kaiming_uniform(&[c, c], c, rng)?)?;
        let post_bn = BatchNormIds::register(store, &format!("{prefix}.post.bn"), c)?;
        let ffn_in = store.register(format!("{prefix}.ffn.in.weight"), kaiming_uniform(&[h, c], c, rng)?)?;
        let ffn_in_bn = BatchNormIds::register(store, &format!("{prefix}.ffn.in.bn"), h)?;
        let ffn_out = store.register(format!("{prefix}.ffn.out.weight"), kaiming_uniform(&[c, h], h, rng)?)?;
        let ffn_out_bn = BatchNormIds::register(store, &format!("{prefix}.ffn.out.bn"), c)?;
        Ok(Self {
            cfg,
            pre_conv,
            pre_bn,
            position,
            update_w,
            update_b,
            attention,
            post_conv,
            post_bn,
            ffn_in,
            ffn_in_bn,
            ffn_out,
            ffn_out_bn,
        })
    }

    pub fn config(&self) -> &GnnBlockConfig {
        &self.cfg
    }

    pub fn attention_kernel(&self) -> Option<ParamId> {
        self.attention
    }

    pub fn position_table(&self) -> ParamId {
        self.position
    }

    pub fn update_weight(&self) -> ParamId {
        self.update_w
    }

    pub fn ffn_out_weight(&self) -> ParamId {
        self.ffn_out
    }

    /// Evaluates the block on `x: [B, C, H, W]`; output has the same shape.
    pub fn forward<S: Scalar>(&self, s: &Session<S>, x: &Var<S>) -> Result<(Var<S>, BlockTrace<S>)> {
        let (batch, c, h, w) = x.value().dims4()?;
        if c != self.cfg.channels {
            return Err(shape_err!("graph block built for {} channels, got {c}", self.cfg.channels));
        }
        let n = h * w;
        let y = s.batchnorm(&conv2d_1x1(x, &s.param(self.pre_conv), None)?, &self.pre_bn)?;
        let flat = ops::reshape(&y, &[batch, c, n])?;

        let mut table = s.param(self.position);
        if (h, w) != self.cfg.grid {
            table = ops::reshape(&table, &[1, c, self.cfg.grid.0, self.cfg.grid.1])?;
            table = bilinear_resize(&table, (h, w))?;
        }
        let table = ops::reshape(&table, &[c, n])?;
        let embedded = ops::add_per_item(&flat, &table)?;

        let graphs = (0..batch)
            .map(|b| {
                let feats = embedded.value().item_slice(b);
                let (k, d) = (self.cfg.k_neighbors, self.cfg.dilation);
                let table = s.frozen_indices(|| Ok(knn_from_slice(feats, c, n, k, d)?.into_table()))?;
                PatchGraph::from_table(n, k, d, table)
            })
            .collect::<Result<Vec<_>>>()?;

        let arg = s.frozen_indices(|| neighbour_argmax(embedded.value(), &graphs))?;
        let mut g = mrconv_at(
            &embedded,
            &graphs,
            arg,
            &s.param(self.update_w),
            Some(&s.param(self.update_b)),
        )?;
        if let Some(kernel) = self.attention {
            let arg = s.frozen_indices(|| ops::argmax_along(g.value(), 1))?;
            g = node_attention_at(&g, &s.param(kernel), arg)?;
        }
        let g = ops::reshape(&g, &[batch, c, h, w])?;
        let refined = s.batchnorm(&conv2d_1x1(&g, &s.param(self.post_conv), None)?, &self.post_bn)?;

        let hidden = s.batchnorm(&conv2d_1x1(&refined, &s.param(self.ffn_in), None)?, &self.ffn_in_bn)?;
        let hidden = s.relu(&hidden)?;
        let ffn = s.batchnorm(&conv2d_1x1(&hidden, &s.param(self.ffn_out), None)?, &self.ffn_out_bn)?;
        let out = ops::add(&ffn, &refined)?;
        Ok((
            out,
            BlockTrace {
                embedded: embedded.value().clone(),
                graphs,
                refined: refined.value().clone(),
            },
        ))
    }
}
