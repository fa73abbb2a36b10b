//! Builds a dilated KNN graph over a few hand-made patch features and prints
//! each node's neighbour row.
//!
//!     cargo run --example knn_graph

use skipgraph::numerics::Tensor;
use skipgraph::patchgraph::build_dilated_knn;

fn main() -> skipgraph::Result<()> {
    // Eight 2-D nodes on two clusters; features are [C, N].
    let xs = [0.0, 0.1, 0.2, 0.3, 5.0, 5.1, 5.2, 5.3];
    let ys = [0.0, 0.0, 0.1, 0.1, 2.0, 2.0, 2.1, 2.1];
    let feats = Tensor::new(&[2, 8], xs.iter().chain(&ys).copied().collect::<Vec<f64>>())?;

    for dilation in [1, 2] {
        let graph = build_dilated_knn(&feats, 3, dilation)?;
        println!("K = 3, d = {dilation}");
        for i in 0..graph.n_nodes() {
            println!("  node {i} -> {:?}", graph.row(i));
        }
    }

    // Too few nodes for K·d is a graph error, not a panic.
    let err = build_dilated_knn(&feats, 4, 2).unwrap_err();
    println!("K = 4, d = 2: {err}");
    Ok(())
}
