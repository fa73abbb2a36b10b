use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{BranchScale, ModelConfig};
use super::layers::{ConvBnRelu, Pointwise};
use super::try_array4;
use crate::efs::{EfsGate, EfsTrace};
use crate::error::{shape_err, Result};
use crate::numerics::{bilinear_resize, ops, ParamStore, Scalar, Session, Tensor, Var};
use crate::patchgraph::{BlockTrace, GnnBlock, GnnBlockConfig};

/// Encoder outputs `f_1..f_4`, stage `i` at `(H / 2^{i+1}, W / 2^{i+1})`.
#[derive(Clone, Debug)]
pub struct FeaturePyramid<S: Scalar> {
    pub stages: [Var<S>; 4],
}

/// Skip features after channel reduction and resizing to the graph grid.
#[derive(Clone, Debug)]
pub struct Preprocessed<S: Scalar> {
    /// `C_r`-channel reductions at each stage's own resolution; these are
    /// the residuals added back after the branch.
    pub reduced: [Var<S>; 4],
    /// The reductions resized to the target grid.
    pub resized: [Var<S>; 4],
    /// Channel concatenation of `resized` in stage order, `[B, 4·C_r, H_t, W_t]`.
    pub cross: Var<S>,
}

/// Region and boundary probability maps from every decoder stage, all at
/// the input resolution. Index 0 comes from the coarsest decoder state.
#[derive(Clone, Debug)]
pub struct DeepOutputs<S: Scalar> {
    pub region: [Var<S>; 4],
    pub boundary: [Var<S>; 4],
}

impl<S: Scalar> DeepOutputs<S> {
    /// Final region prediction (finest decoder stage).
    pub fn prediction(&self) -> &Var<S> {
        &self.region[3]
    }
}

#[derive(Clone, Debug)]
pub struct ForwardTrace<S: Scalar> {
    pub blocks: Vec<BlockTrace<S>>,
    pub gates: Vec<EfsTrace<S>>,
    /// Branch input (`f_c` for cross-scale runs).
    pub branch_input: Option<Tensor<S>>,
    /// Branch output after the last entropy gate.
    pub branch_output: Option<Tensor<S>>,
}

#[derive(Clone, Debug)]
struct Encoder {
    stem: [ConvBnRelu; 2],
    stages: Vec<[ConvBnRelu; 2]>,
}

#[derive(Clone, Debug)]
struct Branch {
    scale: BranchScale,
    layers: Vec<(GnnBlock, EfsGate)>,
}

/// Encoder, graph/entropy skip branch, decoder and deep-supervision heads.
#[derive(Clone, Debug)]
pub struct SkipNet {
    config: ModelConfig,
    encoder: Encoder,
    reduce: [Pointwise; 4],
    branch: Branch,
    decoder: Vec<[ConvBnRelu; 2]>,
    region_heads: [Pointwise; 4],
    boundary_heads: [Pointwise; 4],
}

impl SkipNet {
    /// Registers every parameter into `store`, in a fixed order seeded by
    /// `config.seed`.
    pub fn new<S: Scalar>(config: ModelConfig, store: &mut ParamStore<S>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let ch = config.encoder_channels;
        let cr = config.reduced_channels;

        let stem = [
            ConvBnRelu::register(store, "encoder.stem.0", 3, ch[0], 2, &mut rng)?,
            ConvBnRelu::register(store, "encoder.stem.1", ch[0], ch[0], 1, &mut rng)?,
        ];
        let mut stages = Vec::with_capacity(4);
        let mut prev = ch[0];
        for (i, &c) in ch.iter().enumerate() {
            stages.push([
                ConvBnRelu::register(store, &format!("encoder.stage{}.0", i + 1), prev, c, 2, &mut rng)?,
                ConvBnRelu::register(store, &format!("encoder.stage{}.1", i + 1), c, c, 1, &mut rng)?,
            ]);
            prev = c;
        }

        let reduce = try_array4(|i| {
            Pointwise::register(store, &format!("skip.reduce{}", i + 1), ch[i], cr, &mut rng)
        })?;

        let scale = config.setting.scale();
        let mut layers = Vec::new();
        if scale != BranchScale::None {
            let block_cfg = GnnBlockConfig {
                channels: config.branch_channels(),
                grid: config.graph_grid(),
                k_neighbors: config.k_neighbors,
                dilation: config.dilation,
                kernel: config.attention_kernel,
                node_attention: config.setting.node_attention(),
                ffn_hidden: config.ffn_hidden(),
            };
            for g in 0..config.repetitions {
                let block = GnnBlock::register(store, &format!("branch{g}.graph"), block_cfg.clone(), &mut rng)?;
                let gate = EfsGate::register(
                    store,
                    &format!("branch{g}.entropy_gate"),
                    config.branch_channels(),
                    config.effective_selected(),
                )?;
                layers.push((block, gate));
            }
        }

        let mut decoder = Vec::with_capacity(3);
        for i in 1..=3 {
            decoder.push([
                ConvBnRelu::register(store, &format!("decoder{i}.0"), 2 * cr, cr, 1, &mut rng)?,
                ConvBnRelu::register(store, &format!("decoder{i}.1"), cr, cr, 1, &mut rng)?,
            ]);
        }
        let region_heads = try_array4(|i| {
            Pointwise::register(store, &format!("head{}.region", i + 1), cr, 1, &mut rng)
        })?;
        let boundary_heads = try_array4(|i| {
            Pointwise::register(store, &format!("head{}.boundary", i + 1), cr, 1, &mut rng)
        })?;

        Ok(Self {
            config,
            encoder: Encoder { stem, stages },
            reduce,
            branch: Branch { scale, layers },
            decoder,
            region_heads,
            boundary_heads,
        })
    }

    /// Builds a fresh parameter store together with the model.
    pub fn build<S: Scalar>(config: ModelConfig) -> Result<(Self, ParamStore<S>)> {
        let mut store = ParamStore::new();
        let net = Self::new(config, &mut store)?;
        Ok((net, store))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn branch_layers(&self) -> &[(GnnBlock, EfsGate)] {
        &self.branch.layers
    }

    pub fn reduce_layers(&self) -> &[Pointwise; 4] {
        &self.reduce
    }

    /// Closed-form count of learnable scalars for a configuration.
    pub fn expected_param_count(config: &ModelConfig) -> usize {
        let ch = config.encoder_channels;
        let cr = config.reduced_channels;
        let mut n = ConvBnRelu::count(3, ch[0]) + ConvBnRelu::count(ch[0], ch[0]);
        let mut prev = ch[0];
        for &c in &ch {
            n += ConvBnRelu::count(prev, c) + ConvBnRelu::count(c, c);
            prev = c;
        }
        n += ch.iter().map(|&c| Pointwise::count(c, cr)).sum::<usize>();
        if config.setting.scale() != BranchScale::None {
            let c = config.branch_channels();
            let h = config.ffn_hidden();
            let (gh, gw) = config.graph_grid();
            let attn = if config.setting.node_attention() { config.attention_kernel } else { 0 };
            let block = (c * c + 2 * c) // pre conv + BN
                + c * gh * gw // positional table
                + (2 * c * c + c) // update projection
                + attn
                + (c * c + 2 * c) // post conv + BN
                + (h * c + 2 * h) + (c * h + 2 * c); // feed-forward
            let gate = config.effective_selected() + 1;
            n += config.repetitions * (block + gate);
        }
        n += 3 * (ConvBnRelu::count(2 * cr, cr) + ConvBnRelu::count(cr, cr));
        n += 8 * Pointwise::count(cr, 1);
        n
    }

    pub fn encode<S: Scalar>(&self, s: &Session<S>, image: &Var<S>) -> Result<FeaturePyramid<S>> {
        let (_, c, h, w) = image.value().dims4()?;
        if c != 3 {
            return Err(shape_err!("expected a 3-channel image, got {c} channels"));
        }
        if h == 0 || w == 0 || h % 32 != 0 || w % 32 != 0 {
            return Err(shape_err!("image size {h}×{w} is not a positive multiple of 32"));
        }
        let mut x = self.encoder.stem[0].forward(s, image)?;
        x = self.encoder.stem[1].forward(s, &x)?;
        let mut outs = Vec::with_capacity(4);
        for [a, b] in &self.encoder.stages {
            x = b.forward(s, &a.forward(s, &x)?)?;
            outs.push(x.clone());
        }
        Ok(FeaturePyramid {
            stages: outs.try_into().expect("four stages"),
        })
    }

    /// Channel reduction to `C_r`, resize to the target grid (skipped when
    /// resolutions already agree) and concatenation in stage order.
    pub fn preprocess<S: Scalar>(&self, s: &Session<S>, pyr: &FeaturePyramid<S>) -> Result<Preprocessed<S>> {
        let target = self.target_grid(&pyr.stages[0])?;
        let reduced: [Var<S>; 4] =
            try_array4(|i| self.reduce[i].forward(s, &pyr.stages[i]))?;
        let resized: [Var<S>; 4] = try_array4(|i| bilinear_resize(&reduced[i], target))?;
        let cross = ops::concat_channels(&[&resized[0], &resized[1], &resized[2], &resized[3]])?;
        Ok(Preprocessed {
            reduced,
            resized,
            cross,
        })
    }

    fn target_grid<S: Scalar>(&self, stage1: &Var<S>) -> Result<(usize, usize)> {
        // stage 1 sits at H/4; the target at H/2^s.
        let (_, _, h1, w1) = stage1.value().dims4()?;
        let f = 1 << (self.config.target_scale - 2);
        Ok((h1 / f, w1 / f))
    }

    /// Runs the stacked graph blocks and entropy gates on `x`.
    pub fn run_branch<S: Scalar>(
        &self,
        s: &Session<S>,
        x: &Var<S>,
        trace: &mut ForwardTrace<S>,
    ) -> Result<Var<S>> {
        let mut z = x.clone();
        for (block, gate) in &self.branch.layers {
            let (y, bt) = block.forward(s, &z)?;
            let (y, gt) = gate.forward(s, &y)?;
            trace.blocks.push(bt);
            trace.gates.push(gt);
            z = y;
        }
        Ok(z)
    }

    /// Applies the skip branch and the residual reconstruction, returning
    /// the four enhanced skip features `f̂^G_1..f̂^G_4`.
    pub fn skip_features<S: Scalar>(
        &self,
        s: &Session<S>,
        pre: &Preprocessed<S>,
        trace: &mut ForwardTrace<S>,
    ) -> Result<[Var<S>; 4]> {
        match self.branch.scale {
            BranchScale::None => Ok(pre.reduced.clone()),
            BranchScale::Cross => {
                trace.branch_input = Some(pre.cross.value().clone());
                let out = self.run_branch(s, &pre.cross, trace)?;
                trace.branch_output = Some(out.value().clone());
                postprocess(&out, &pre.reduced)
            }
            BranchScale::Single => {
                let deepest = &pre.reduced[3];
                trace.branch_input = Some(deepest.value().clone());
                let out = self.run_branch(s, deepest, trace)?;
                trace.branch_output = Some(out.value().clone());
                let mut skips = pre.reduced.clone();
                skips[3] = ops::add(deepest, &out)?;
                Ok(skips)
            }
        }
    }

    /// Decoder recurrence `D_1 = f̂_4`, `D_{i+1} = Dec_i([f̂_{4-i}, Up(D_i)])`.
    pub fn decode<S: Scalar>(&self, s: &Session<S>, skips: &[Var<S>; 4]) -> Result<[Var<S>; 4]> {
        let mut states = vec![skips[3].clone()];
        for (i, [a, b]) in self.decoder.iter().enumerate() {
            let skip = &skips[2 - i];
            let (_, _, h, w) = skip.value().dims4()?;
            let up = bilinear_resize(states.last().unwrap(), (h, w))?;
            let joined = ops::concat_channels(&[skip, &up])?;
            states.push(b.forward(s, &a.forward(s, &joined)?)?);
        }
        Ok(states.try_into().expect("four decoder states"))
    }

    /// Region/boundary heads: pointwise conv, sigmoid, upsample to `size`.
    pub fn heads<S: Scalar>(
        &self,
        s: &Session<S>,
        states: &[Var<S>; 4],
        size: (usize, usize),
    ) -> Result<DeepOutputs<S>> {
        let head = |h: &Pointwise, d: &Var<S>| -> Result<Var<S>> {
            bilinear_resize(&ops::sigmoid(&h.forward(s, d)?)?, size)
        };
        Ok(DeepOutputs {
            region: try_array4(|i| head(&self.region_heads[i], &states[i]))?,
            boundary: try_array4(|i| head(&self.boundary_heads[i], &states[i]))?,
        })
    }

    pub fn forward_traced<S: Scalar>(
        &self,
        s: &Session<S>,
        image: &Var<S>,
    ) -> Result<(DeepOutputs<S>, ForwardTrace<S>)> {
        let (_, _, h, w) = image.value().dims4()?;
        let mut trace = ForwardTrace {
            blocks: Vec::new(),
            gates: Vec::new(),
            branch_input: None,
            branch_output: None,
        };
        let pyr = self.encode(s, image)?;
        let pre = self.preprocess(s, &pyr)?;
        let skips = self.skip_features(s, &pre, &mut trace)?;
        let states = self.decode(s, &skips)?;
        Ok((self.heads(s, &states, (h, w))?, trace))
    }

    pub fn forward<S: Scalar>(&self, s: &Session<S>, image: &Var<S>) -> Result<DeepOutputs<S>> {
        Ok(self.forward_traced(s, image)?.0)
    }
}

/// Splits the branch output into `C_r`-channel slabs in stage order,
/// resizes slab `i` to the resolution of `residuals[i]` and adds it.
pub fn postprocess<S: Scalar>(branch_out: &Var<S>, residuals: &[Var<S>; 4]) -> Result<[Var<S>; 4]> {
    let (_, c, _, _) = branch_out.value().dims4()?;
    if c % 4 != 0 {
        return Err(shape_err!("branch output has {c} channels, not divisible by 4"));
    }
    let cr = c / 4;
    try_array4(|i| {
        let (_, rc, h, w) = residuals[i].value().dims4()?;
        if rc != cr {
            return Err(shape_err!("residual {i} has {rc} channels, slab has {cr}"));
        }
        let slab = ops::slice_channels(branch_out, i * cr, (i + 1) * cr)?;
        ops::add(&residuals[i], &bilinear_resize(&slab, (h, w))?)
    })
}
