//! Encoder–decoder segmentation network whose skip connections pass through
//! a graph branch with entropy-driven spatial gating.

mod config;
mod layers;
mod model;

pub use config::{BranchScale, ModelConfig, Setting};
pub use layers::{ConvBnRelu, Pointwise};
pub use model::{postprocess, DeepOutputs, FeaturePyramid, ForwardTrace, Preprocessed, SkipNet};

use crate::error::Result;

pub(crate) fn try_array4<T>(mut f: impl FnMut(usize) -> Result<T>) -> Result<[T; 4]> {
    Ok([f(0)?, f(1)?, f(2)?, f(3)?])
}
