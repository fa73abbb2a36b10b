//! Run-level workflows: corpus generation, training, evaluation, ablation
//! and graph visualisation, plus their on-disk formats.

pub mod ablate;
pub mod checkpoint;
mod config;
pub mod corpus;
pub mod eval;
pub mod train;
pub mod viz;

pub use config::{AblationConfig, CorpusConfig, DataConfig, RunConfig, TrainConfig};
