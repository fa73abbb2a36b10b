//! A shrunken ablation: every setting and sweep value, one epoch each on a
//! few images. Writes the four CSV tables and prints parameter counts.

use std::path::PathBuf;

use skipgraph::pipeline::ablate::{ablate, AblationData};
use skipgraph::pipeline::corpus::generate_splits;
use skipgraph::pipeline::RunConfig;

fn main() -> skipgraph::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "runs/ablation_example".into()));
    let mut cfg = RunConfig::default();
    cfg.ablation.epochs = 1;
    cfg.ablation.train_subset = 8;
    cfg.ablation.eval_subset = 4;
    cfg.corpus.val = 4;
    cfg.corpus.test = 4;

    let splits = generate_splits(&cfg.corpus)?;
    let data = AblationData {
        train: &splits.train.1,
        val: &splits.val.1,
        seen: &splits.test_seen.1,
        unseen: &splits.test_unseen.1,
    };
    let report = ablate::<f32>(&cfg, &data, &out)?;

    for row in &report.settings {
        println!("{}  {:>8} params  seen DSC {:.3}", row.model.setting.name(), row.params, row.seen.dsc);
    }
    for row in &report.m_sweep {
        println!("M = {:3}  {:>8} params", row.model.selected_channels, row.params);
    }
    for row in &report.repetitions {
        println!("G = {}  {:>8} params", row.model.repetitions, row.params);
    }
    println!("tables in {}", out.display());
    Ok(())
}
