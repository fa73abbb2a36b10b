//! Dense tensors, reverse-mode differentiation and the neural-network
//! primitives the model is built from.

pub mod atns;
mod autograd;
pub mod conv;
pub mod gradcheck;
pub mod norm;
pub mod ops;
pub mod params;
pub mod resize;
mod scalar;
mod tensor;

pub use autograd::Var;
pub use conv::{conv1d, conv2d, conv2d_1x1};
pub use gradcheck::{grad_check, grad_check_reference, GradCheckOptions, GradCheckReport, Probe};
pub use norm::{batchnorm, NormMode, RunningStats};
pub use ops::{pool_global, PoolKind};
pub use params::{BatchNormIds, BufferId, IndexTape, ParamId, ParamStore, Parameter, Session};
pub use resize::{bilinear_resize, resize_tensor};
pub use scalar::{DType, Scalar};
pub use tensor::Tensor;
