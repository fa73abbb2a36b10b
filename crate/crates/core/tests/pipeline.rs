mod common;

use skipgraph::metrics::mean_std;
use skipgraph::numerics::DType;
use skipgraph::optim::{cosine_lr, Adam};
use skipgraph::pipeline::checkpoint::{self, EntryKind};
use skipgraph::pipeline::corpus::generate_splits;
use skipgraph::pipeline::eval::{score, summary_csv, SeedResult};
use skipgraph::pipeline::train::{train, TrainOptions, BEST, LAST, LOG_FILE};
use skipgraph::pipeline::viz::{graph_dump, render};
use skipgraph::pipeline::RunConfig;
use skipgraph::skipnet::{ModelConfig, SkipNet};
use skipgraph::synth::{generate, SynthSpec};
use skipgraph::Error;

fn tiny() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model.reduced_channels = 8;
    cfg.model.k_neighbors = 5;
    cfg.model.selected_channels = 8;
    cfg.train.epochs = 2;
    cfg.corpus.train = 8;
    cfg.corpus.val = 4;
    cfg.corpus.test = 4;
    cfg
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = tiny();
    let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert!(matches!(RunConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
    assert!(matches!(RunConfig::from_toml_str("[model]\ninput_size = [48, 64]"), Err(Error::Config(_))));
}

#[test]
fn checkpoint_round_trip_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let (_, mut store) = SkipNet::build::<f32>(cfg.model.clone()).unwrap();
    store.buffers_mut()[0].value.data_mut()[0] = 0.25;
    let mut adam = Adam::new(cfg.optimizer.clone(), &store).unwrap();
    adam.step = 7;
    adam.m[1].data_mut()[0] = -3.5;
    let stem = dir.path().join("ck");
    checkpoint::save(&stem, &cfg, &store, Some(&adam), 3, 0.5).unwrap();

    let (_, template) = SkipNet::build::<f32>(cfg.model.clone()).unwrap();
    let ck = checkpoint::load(&stem, &template).unwrap();
    assert_eq!(ck.manifest.epoch, 3);
    assert_eq!(ck.manifest.dtype, DType::F32);
    assert_eq!(ck.manifest.config, cfg);
    assert!(ck.store.params().iter().zip(store.params()).all(|(a, b)| a.value == b.value));
    assert!(ck.store.buffers().iter().zip(store.buffers()).all(|(a, b)| a.value == b.value));
    assert_eq!(ck.adam.as_ref().map(|a| (a.step, &a.m, &a.v)), Some((7, &adam.m, &adam.v)));
    let kinds: Vec<_> = ck.manifest.entries.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.iter().filter(|&&k| k == EntryKind::AdamV).count(), store.params().len());

    // Weights only.
    let bare = dir.path().join("bare");
    checkpoint::save(&bare, &cfg, &store, None, 3, 0.5).unwrap();
    assert!(checkpoint::load(&bare, &template).unwrap().adam.is_none());

    // Another architecture.
    let (_, wider) = SkipNet::build::<f32>(ModelConfig { reduced_channels: 16, selected_channels: 16, ..cfg.model.clone() }).unwrap();
    assert!(matches!(checkpoint::load(&stem, &wider), Err(Error::Manifest(_))));

    // Truncated payload.
    let atns = checkpoint::paths(&stem).0;
    let bytes = std::fs::read(&atns).unwrap();
    std::fs::write(&atns, &bytes[..bytes.len() / 2]).unwrap();
    assert!(checkpoint::load(&stem, &template).is_err());
}

#[test]
fn cosine_schedule_closed_form() {
    assert_eq!(cosine_lr(1e-4, 1e-6, 0, 60), 1e-4);
    assert!((cosine_lr(1e-4, 1e-6, 59, 60) - 1e-6).abs() < 1e-18);
    // Midpoint of an odd-length schedule is the arithmetic mean.
    assert!((cosine_lr(1e-3, 1e-5, 5, 11) - 0.5 * (1e-3 + 1e-5)).abs() < 1e-15);
    let lrs: Vec<f64> = (0..20).map(|e| cosine_lr(1e-3, 1e-6, e, 20)).collect();
    assert!(lrs.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(cosine_lr(1e-3, 1e-6, 0, 1), 1e-3);
}

#[test]
fn ground_truth_predictions_score_perfectly() {
    let samples = generate(&SynthSpec { count: 6, ..SynthSpec::default() }).unwrap();
    let preds: Vec<Vec<f64>> = samples.iter().map(|s| s.mask.data().to_vec()).collect();
    for row in score(&preds, &samples).unwrap() {
        assert_eq!((row.dsc, row.miou, row.mae, row.hd95), (1.0, 1.0, 0.0, Some(0.0)));
    }
    assert!(score(&preds[..2], &samples).is_err());
}

#[test]
fn summary_reports_mean_and_sample_std_over_seeds() {
    let samples = generate(&SynthSpec { count: 4, ..SynthSpec::default() }).unwrap();
    let truth: Vec<Vec<f64>> = samples.iter().map(|s| s.mask.data().to_vec()).collect();
    let empty: Vec<Vec<f64>> = samples.iter().map(|s| vec![0.0; s.mask.len()]).collect();
    // Seed 1 perfect, seed 2 predicts nothing (DSC 0, HD95 undefined).
    let results = vec![
        SeedResult { split: "seen".into(), seed: 1, rows: score(&truth, &samples).unwrap() },
        SeedResult { split: "seen".into(), seed: 2, rows: score(&empty, &samples).unwrap() },
    ];
    let csv = summary_csv(&results);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "split,metric,seed_1,seed_2,mean,std");
    let (m, sd) = mean_std(&[1.0, 0.0]);
    assert_eq!((m, sd), (0.5, std::f64::consts::FRAC_1_SQRT_2));
    assert_eq!(lines[1], format!("seen,dsc,1,0,{m},{sd}"));
    // HD95: only seed 1 defined; a single value has zero spread.
    assert_eq!(lines[4], "seen,hd95,0,,0,0");
}

#[test]
fn training_smoke_and_exact_resume() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.train.precision = DType::F64;
    let splits = generate_splits(&cfg.corpus).unwrap();
    let quiet = TrainOptions { quiet: true, ..Default::default() };

    let full = dir.path().join("full");
    let out = train::<f64>(&cfg, &splits.train.1, &splits.val.1, &full, quiet).unwrap();
    assert_eq!(out.log.len(), 2);
    assert!(out.log.iter().all(|e| e.loss.total().is_finite() && (0.0..=1.0).contains(&e.val_dsc)));
    assert_eq!(out.log[1].lr, 1e-6);
    for f in ["config.toml", LOG_FILE, "best.atns", "best.json", "last.atns", "last.json"] {
        assert!(full.join(f).exists(), "{f}");
    }
    assert_eq!(checkpoint::read_manifest(&full.join(LAST)).unwrap().epoch, 2);
    assert!(checkpoint::read_manifest(&full.join(BEST)).unwrap().epoch <= 2);

    let split = dir.path().join("split");
    train::<f64>(&cfg, &splits.train.1, &splits.val.1, &split, TrainOptions { stop_after: Some(1), ..quiet }).unwrap();
    assert_eq!(checkpoint::read_manifest(&split.join(LAST)).unwrap().epoch, 1);
    train::<f64>(&cfg, &splits.train.1, &splits.val.1, &split, TrainOptions { resume: true, ..quiet }).unwrap();
    for f in ["last.atns", LOG_FILE] {
        assert_eq!(std::fs::read(full.join(f)).unwrap(), std::fs::read(split.join(f)).unwrap(), "{f}");
    }

    // Resuming under a different config is refused.
    let mut other = cfg.clone();
    other.optimizer.lr = 1e-3;
    let err = train::<f64>(&other, &splits.train.1, &splits.val.1, &split, TrainOptions { resume: true, ..quiet });
    assert!(matches!(err, Err(Error::Manifest(_))));
    assert!(matches!(train::<f64>(&cfg, &[], &splits.val.1, &split, quiet), Err(Error::Config(_))));
}

#[test]
fn graph_dump_matches_the_neighbour_oracle() {
    let cfg = tiny().model;
    let (net, store) = SkipNet::build::<f64>(cfg.clone()).unwrap();
    let image = generate(&SynthSpec { count: 1, ..SynthSpec::default() }).unwrap()[0].image.clone();
    let seeds = [(2, 2), (4, 5), (6, 1)];
    let dump = graph_dump(&net, &store, &image, &seeds, 5).unwrap();
    assert_eq!(dump.grid, (8, 8));
    assert_eq!(dump.nodes.len(), 64);
    assert_eq!(dump.edges.len(), 15);

    let (c, n) = (dump.features.len(), dump.features[0].len());
    let flat: Vec<f64> = dump.features.concat();
    let oracle = common::knn_oracle(&flat, c, n, cfg.k_neighbors, cfg.dilation);
    for seed in &dump.seeds {
        let got: Vec<usize> = seed.neighbours.iter().map(|nb| nb.node).collect();
        assert_eq!(got, oracle[seed.node]);
        let ranked: Vec<usize> = dump.edges.iter().filter(|e| e.src == seed.node).map(|e| e.dst).collect();
        assert_eq!(ranked, got);
        assert!(seed.neighbours.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    let json = serde_json::to_string(&dump).unwrap();
    assert_eq!(serde_json::from_str::<skipgraph::pipeline::viz::GraphDump>(&json).unwrap(), dump);
    assert_eq!(render(&image, &dump).unwrap(), render(&image, &dump).unwrap());
    assert_eq!(render(&image, &dump).unwrap().dimensions(), (256, 256));

    assert!(matches!(graph_dump(&net, &store, &image, &[(8, 0)], 5), Err(Error::Argument(_))));
    assert!(matches!(graph_dump(&net, &store, &image, &seeds, 6), Err(Error::Argument(_))));
    let (plain, plain_store) = SkipNet::build::<f64>(ModelConfig { setting: skipgraph::skipnet::Setting::S0, ..cfg }).unwrap();
    assert!(matches!(graph_dump(&plain, &plain_store, &image, &seeds, 5), Err(Error::Argument(_))));
}
