//! Patch graphs over flattened feature maps and the attentional graph block.

mod attention;
mod block;
mod knn;
mod mrconv;

pub use attention::{node_attention, node_attention_at, node_attention_gate};
pub use block::{BlockTrace, GnnBlock, GnnBlockConfig};
pub use knn::{build_dilated_knn, PatchGraph};
pub use mrconv::{max_relative, max_relative_at, mrconv, mrconv_at, neighbour_argmax};
