//! Trains briefly, then draws the five nearest graph neighbours of three seed
//! patches on a test image (PNG) and dumps the adjacency as JSON.

use std::path::PathBuf;

use skipgraph::pipeline::corpus::{generate_splits, write_png_rgb};
use skipgraph::pipeline::train::{train, TrainOptions, BEST};
use skipgraph::pipeline::viz::{graph_dump, render};
use skipgraph::pipeline::{checkpoint, RunConfig};
use skipgraph::skipnet::SkipNet;

fn main() -> skipgraph::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "runs/viz_example".into()));
    let mut cfg = RunConfig::default();
    cfg.model.reduced_channels = 16;
    cfg.model.selected_channels = 16;
    cfg.optimizer.lr = 1e-3;
    cfg.train.epochs = 2;
    cfg.corpus.train = 32;
    cfg.corpus.val = 8;
    cfg.corpus.test = 4;

    let splits = generate_splits(&cfg.corpus)?;
    train::<f32>(&cfg, &splits.train.1, &splits.val.1, &out, TrainOptions::default())?;

    let (net, template) = SkipNet::build::<f32>(cfg.model.clone())?;
    let ck = checkpoint::load(&out.join(BEST), &template)?;
    let image = &splits.test_seen.1[0].image;
    let dump = graph_dump(&net, &ck.store, image, &[(2, 2), (4, 5), (6, 1)], 5)?;
    for seed in &dump.seeds {
        let nbrs: Vec<_> = seed.neighbours.iter().map(|n| (n.row, n.col)).collect();
        println!("patch ({}, {}) -> {nbrs:?}", seed.row, seed.col);
    }

    write_png_rgb(&render(image, &dump)?, &out.join("graph.png"))?;
    let json = serde_json::to_string_pretty(&dump).expect("graph dump serializes");
    std::fs::write(out.join("graph.json"), json).expect("write graph.json");
    println!("{} edges; wrote graph.png and graph.json to {}", dump.edges.len(), out.display());
    Ok(())
}
