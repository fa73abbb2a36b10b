//! Medical image segmentation with graph-enhanced skip connections.

pub mod efs;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod numerics;
pub mod optim;
pub mod patchgraph;
pub mod pipeline;
pub mod skipnet;
pub mod synth;

pub use error::{Error, Result};
