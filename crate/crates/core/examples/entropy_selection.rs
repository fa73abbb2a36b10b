//! Scores channels by mean pixel entropy of their sigmoid activations and
//! gates a feature map with the Bottom-M channels.

use skipgraph::efs::{bottom_m_select, channel_entropy, efs_spatial_attention};
use skipgraph::numerics::{Tensor, Var};

fn main() -> skipgraph::Result<()> {
    let (c, h, w) = (6, 4, 4);
    // Channel c has activations of magnitude ~ c: confident channels come last.
    let f = Tensor::<f64>::from_fn(&[1, c, h, w], |i| {
        let ch = i / (h * w);
        let sign = if (i % (h * w)) % 2 == 0 { 1.0 } else { -1.0 };
        sign * ch as f64 * 1.5
    })?;

    let scores = channel_entropy(&f)?;
    for (ch, s) in scores[0].scores.iter().enumerate() {
        println!("channel {ch}: entropy {s:.4}");
    }
    let picked = bottom_m_select(&scores[0].scores, 2)?;
    println!("bottom-2 channels: {picked:?}");

    let proj = Var::constant(Tensor::new(&[1, 2], vec![0.5, -0.5])?);
    let (gated, attention) = efs_spatial_attention(&Var::constant(f), &[picked], &proj, None)?;
    println!("attention map {:?}, first values {:?}", attention.shape(), &attention.data()[..4]);
    println!("gated features {:?}", gated.shape());
    Ok(())
}
