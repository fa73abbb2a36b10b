use rand::Rng;

use crate::error::Result;
use crate::numerics::{
    conv2d, conv2d_1x1, params::kaiming_uniform, BatchNormIds, ParamId, ParamStore, Scalar, Session,
    Tensor, Var,
};

/// 3×3 convolution (no bias) → batch norm → ReLU.
#[derive(Clone, Debug)]
pub struct ConvBnRelu {
    weight: ParamId,
    bn: BatchNormIds,
    stride: usize,
}

impl ConvBnRelu {
    pub fn register<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            weight: store.register(
                format!("{prefix}.weight"),
                kaiming_uniform(&[c_out, c_in, 3, 3], c_in * 9, rng)?,
            )?,
            bn: BatchNormIds::register(store, &format!("{prefix}.bn"), c_out)?,
            stride,
        })
    }

    pub fn forward<S: Scalar>(&self, s: &Session<S>, x: &Var<S>) -> Result<Var<S>> {
        let y = conv2d(x, &s.param(self.weight), None, self.stride, 1)?;
        s.relu(&s.batchnorm(&y, &self.bn)?)
    }

    /// Learnable scalars: `9·c_in·c_out + 2·c_out`.
    pub fn count(c_in: usize, c_out: usize) -> usize {
        9 * c_in * c_out + 2 * c_out
    }
}

/// Pointwise convolution with bias.
#[derive(Clone, Debug)]
pub struct Pointwise {
    weight: ParamId,
    bias: ParamId,
}

impl Pointwise {
    pub fn register<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            weight: store.register(format!("{prefix}.weight"), kaiming_uniform(&[c_out, c_in], c_in, rng)?)?,
            bias: store.register(format!("{prefix}.bias"), Tensor::zeros(&[c_out])?)?,
        })
    }

    pub fn forward<S: Scalar>(&self, s: &Session<S>, x: &Var<S>) -> Result<Var<S>> {
        conv2d_1x1(x, &s.param(self.weight), Some(&s.param(self.bias)))
    }

    pub fn ids(&self) -> (ParamId, ParamId) {
        (self.weight, self.bias)
    }

    pub fn count(c_in: usize, c_out: usize) -> usize {
        c_in * c_out + c_out
    }
}
