//! Trains the full model on a small synthetic corpus, then evaluates the
//! best checkpoint on the seen and shifted test splits.
//!
//!     cargo run --example train_synthetic -- [epochs] [out_dir]
//!
//! The defaults (8 epochs, 64 training images) finish in about a minute; the
//! desk-scale recipe is 60 epochs on 200 images.

use std::path::PathBuf;

use skipgraph::pipeline::corpus::generate_splits;
use skipgraph::pipeline::eval::{evaluate_checkpoint, summarize};
use skipgraph::pipeline::train::{train, TrainOptions, BEST};
use skipgraph::pipeline::RunConfig;

fn main() -> skipgraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(8);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "runs/example".into()));

    let mut cfg = RunConfig::default();
    cfg.model.reduced_channels = 16;
    cfg.model.selected_channels = 16;
    cfg.optimizer.lr = 1e-3;
    cfg.train.epochs = epochs;
    cfg.corpus.train = 64;
    cfg.corpus.val = 16;
    cfg.corpus.test = 32;

    let splits = generate_splits(&cfg.corpus)?;
    let outcome = train::<f32>(&cfg, &splits.train.1, &splits.val.1, &out, TrainOptions::default())?;
    println!("best validation DSC {:.4}", outcome.best_val_dsc);

    for (name, split) in [("seen", &splits.test_seen.1), ("unseen", &splits.test_unseen.1)] {
        let s = summarize(&evaluate_checkpoint::<f32>(&cfg, &out.join(BEST), split)?);
        println!("{name:6} DSC {:.4}  mIoU {:.4}  MAE {:.4}  HD95 {:.2}", s.dsc, s.miou, s.mae, s.hd95);
    }
    Ok(())
}
