//! Command-line front end: `gen-data`, `train`, `eval`, `ablate`, `viz-graph`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skipgraph::numerics::{DType, Scalar};
use skipgraph::pipeline::ablate::{ablate, AblationData};
use skipgraph::pipeline::corpus::{generate_splits, read_corpus, write_corpus, write_png_rgb};
use skipgraph::pipeline::eval::{attention_png, entropy_csv, evaluate_checkpoint, per_image_csv, summary_csv, SeedResult};
use skipgraph::pipeline::train::{train, TrainOptions, BEST};
use skipgraph::pipeline::viz::{graph_dump, render};
use skipgraph::pipeline::{checkpoint, RunConfig};
use skipgraph::numerics::{Session, Tensor, Var};
use skipgraph::skipnet::SkipNet;
use skipgraph::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Segmentation with graph-enhanced skip connections")]
struct Cli {
    /// Run configuration (TOML); defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train/val/test_seen/test_unseen synthetic corpora.
    GenData {
        /// Output root (defaults to the parent of `data.train`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per seed into `<output_dir>/seed<s>`.
    Train {
        /// Seeds to train (defaults to `seed` from the config).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Continue from `<run>/last` when present.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate `<output_dir>/seed<s>/best` on both test splits.
    Eval {
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Also write entropy scores and the attention map of the first test image.
        #[arg(long)]
        dump_attention: bool,
    },
    /// Run the setting grid and the M / resolution / repetition sweeps.
    Ablate,
    /// Render a seed patch's nearest graph neighbours on an input image.
    VizGraph {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Image index in the seen test split.
        #[arg(long, default_value_t = 0)]
        image: usize,
        /// Seed patches as `row:col`, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2:2,4:5,6:1")]
        seeds: Vec<String>,
        #[arg(long, default_value_t = 5)]
        neighbours: usize,
        #[arg(long, default_value = "graph")]
        out: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn seeds_or(seeds: Vec<u64>, cfg: &RunConfig, all: bool) -> Vec<u64> {
    match (seeds.is_empty(), all) {
        (false, _) => seeds,
        (true, true) => cfg.seeds.clone(),
        (true, false) => vec![cfg.seed],
    }
}

fn run<S: Scalar>(cli: Cli, cfg: RunConfig) -> Result<()> {
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::GenData { out: root } => {
            let root = root.unwrap_or_else(|| cfg.data.train.parent().unwrap_or(Path::new(".")).to_path_buf());
            let s = generate_splits(&cfg.corpus)?;
            for (name, (spec, samples)) in [("train", s.train), ("val", s.val), ("test_seen", s.test_seen), ("test_unseen", s.test_unseen)] {
                write_corpus(&root.join(name), &spec, &samples)?;
                println!("{name}: {} samples", samples.len());
            }
        }
        Command::Train { seeds, resume } => {
            let train_set = read_corpus(&cfg.data.train)?;
            let val_set = read_corpus(&cfg.data.val)?;
            for seed in seeds_or(seeds, &cfg, false) {
                let run = cfg.with_seed(seed);
                let dir = out.join(format!("seed{seed}"));
                let res = train::<S>(&run, &train_set, &val_set, &dir, TrainOptions { resume, ..Default::default() })?;
                println!("seed {seed}: best validation DSC {:.4} ({})", res.best_val_dsc, dir.display());
            }
        }
        Command::Eval { seeds, dump_attention } => {
            let splits = [("seen", read_corpus(&cfg.data.test_seen)?), ("unseen", read_corpus(&cfg.data.test_unseen)?)];
            let seeds = seeds_or(seeds, &cfg, true);
            let mut results = Vec::new();
            for (split, samples) in &splits {
                for &seed in &seeds {
                    let stem = out.join(format!("seed{seed}")).join(BEST);
                    let rows = evaluate_checkpoint::<S>(&cfg, &stem, samples)?;
                    results.push(SeedResult { split: split.to_string(), seed, rows });
                }
            }
            write(&out.join("eval_per_image.csv"), &per_image_csv(&results))?;
            let summary = summary_csv(&results);
            write(&out.join("eval_summary.csv"), &summary)?;
            print!("{summary}");
            if dump_attention {
                let stem = out.join(format!("seed{}", seeds[0])).join(BEST);
                let manifest = checkpoint::read_manifest(&stem)?;
                let (net, template) = SkipNet::build::<S>(manifest.config.model)?;
                let ck = checkpoint::load(&stem, &template)?;
                let img = &splits[0].1[0].image;
                let x: Tensor<S> = img.cast();
                let x = x.reshape(&[1, 3, img.shape()[1], img.shape()[2]])?;
                let (_, trace) = net.forward_traced(&Session::eval(&ck.store), &Var::constant(x))?;
                write(&out.join("entropy.csv"), &entropy_csv(&trace))?;
                if let Some(png) = attention_png(&trace, 0) {
                    let path = out.join("attention.png");
                    png.save(&path).map_err(|e| Error::Format(e.to_string()))?;
                }
            }
        }
        Command::Ablate => {
            let load = |p: &Path| read_corpus(p);
            let (train_set, val_set) = (load(&cfg.data.train)?, load(&cfg.data.val)?);
            let (seen, unseen) = (load(&cfg.data.test_seen)?, load(&cfg.data.test_unseen)?);
            let data = AblationData { train: &train_set, val: &val_set, seen: &seen, unseen: &unseen };
            ablate::<S>(&cfg, &data, &out.join("ablation"))?;
            println!("tables written to {}", out.join("ablation").display());
        }
        Command::VizGraph { checkpoint: stem, image, seeds, neighbours, out: dest } => {
            let seeds = seeds
                .iter()
                .map(|s| {
                    let (r, c) = s.split_once(':').ok_or_else(|| Error::Argument(format!("seed '{s}' is not row:col")))?;
                    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::Argument(format!("bad seed coordinate '{v}'")));
                    Ok((parse(r)?, parse(c)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let manifest = checkpoint::read_manifest(&stem)?;
            let (net, template) = SkipNet::build::<S>(manifest.config.model)?;
            let ck = checkpoint::load(&stem, &template)?;
            let samples = read_corpus(&cfg.data.test_seen)?;
            let sample = samples
                .get(image)
                .ok_or_else(|| Error::Argument(format!("image {image} not in the seen test split ({} images)", samples.len())))?;
            let dump = graph_dump(&net, &ck.store, &sample.image, &seeds, neighbours)?;
            let json = serde_json::to_string_pretty(&dump).map_err(|e| Error::Format(e.to_string()))?;
            write(&dest.with_extension("json"), &json)?;
            write_png_rgb(&render(&sample.image, &dump)?, &dest.with_extension("png"))?;
            println!("{} edges written to {}", dump.edges.len(), dest.with_extension("json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        match cfg.train.precision {
            DType::F32 => run::<f32>(cli, cfg),
            DType::F64 => run::<f64>(cli, cfg),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
