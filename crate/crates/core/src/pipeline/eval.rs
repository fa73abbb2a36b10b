use std::fmt::Write as _;
use std::path::Path;

use image::{GrayImage, Luma};

use super::checkpoint;
use super::config::RunConfig;
use super::corpus::stack;
use crate::error::{Error, Result};
use crate::metrics::{hd95, mae, mean_std, ConfusionCounts, Mask};
use crate::numerics::{ParamStore, Scalar, Session, Var};
use crate::skipnet::{ForwardTrace, SkipNet};
use crate::synth::Sample;

/// Metrics of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageScore {
    pub dsc: f64,
    pub miou: f64,
    pub mae: f64,
    /// `None` when either mask is empty.
    pub hd95: Option<f64>,
}

/// Final region probabilities (`H·W` values per image) in inference mode.
pub fn predict<S: Scalar>(net: &SkipNet, store: &ParamStore<S>, samples: &[Sample], batch: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let (x, _) = stack::<S>(&refs)?;
        let session = Session::eval(store);
        let pred = net.forward(&session, &Var::constant(x))?;
        let p = pred.prediction().value();
        let plane = p.len() / chunk.len();
        out.extend((0..chunk.len()).map(|b| p.data()[b * plane..(b + 1) * plane].iter().map(|v| v.as_f64()).collect()));
    }
    Ok(out)
}

/// Scores probability maps against the samples' masks.
pub fn score(preds: &[Vec<f64>], samples: &[Sample]) -> Result<Vec<ImageScore>> {
    if preds.len() != samples.len() {
        return Err(Error::Shape(format!("{} predictions for {} samples", preds.len(), samples.len())));
    }
    preds
        .iter()
        .zip(samples)
        .map(|(p, s)| {
            let (h, w) = s.size();
            let pred = Mask::binarize(h, w, p)?;
            let truth = Mask::binarize(h, w, s.mask.data())?;
            let c = ConfusionCounts::from_masks(&pred, &truth)?;
            let hd = match hd95(&pred, &truth) {
                Ok(d) => Some(d),
                Err(Error::UndefinedDistance(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ImageScore {
                dsc: c.dsc(),
                miou: c.iou(),
                mae: mae(p, s.mask.data())?,
                hd95: hd,
            })
        })
        .collect()
}

/// Per-split means of one seed's scores.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSummary {
    pub dsc: f64,
    pub miou: f64,
    pub mae: f64,
    /// Mean over images where HD95 is defined (NaN when none is).
    pub hd95: f64,
}

pub fn summarize(rows: &[ImageScore]) -> SplitSummary {
    let n = rows.len() as f64;
    let hd: Vec<f64> = rows.iter().filter_map(|r| r.hd95).collect();
    SplitSummary {
        dsc: rows.iter().map(|r| r.dsc).sum::<f64>() / n,
        miou: rows.iter().map(|r| r.miou).sum::<f64>() / n,
        mae: rows.iter().map(|r| r.mae).sum::<f64>() / n,
        hd95: if hd.is_empty() {
            f64::NAN
        } else {
            hd.iter().sum::<f64>() / hd.len() as f64
        },
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// One seed's evaluation of one split.
pub struct SeedResult {
    pub split: String,
    pub seed: u64,
    pub rows: Vec<ImageScore>,
}

/// `split,seed,image,dsc,miou,mae,hd95` (HD95 blank when undefined).
pub fn per_image_csv(results: &[SeedResult]) -> String {
    let mut s = String::from("split,seed,image,dsc,miou,mae,hd95\n");
    for r in results {
        for (i, row) in r.rows.iter().enumerate() {
            let _ = writeln!(s, "{},{},{i},{},{},{},{}", r.split, r.seed, row.dsc, row.miou, row.mae, opt(row.hd95));
        }
    }
    s
}

type Metric = (&'static str, fn(&SplitSummary) -> f64);

/// `split,metric,seed_<s>...,mean,std`: per-seed image means, then the mean
/// and sample standard deviation across seeds.
pub fn summary_csv(results: &[SeedResult]) -> String {
    let mut splits: Vec<&str> = Vec::new();
    for r in results {
        if !splits.contains(&r.split.as_str()) {
            splits.push(&r.split);
        }
    }
    let seeds: Vec<u64> = results.iter().filter(|r| r.split == splits[0]).map(|r| r.seed).collect();
    let mut s = String::from("split,metric");
    for seed in &seeds {
        let _ = write!(s, ",seed_{seed}");
    }
    s.push_str(",mean,std\n");
    for split in splits {
        let per_seed: Vec<SplitSummary> = results.iter().filter(|r| r.split == split).map(|r| summarize(&r.rows)).collect();
        let metrics: [Metric; 4] = [
            ("dsc", |m| m.dsc),
            ("miou", |m| m.miou),
            ("mae", |m| m.mae),
            ("hd95", |m| m.hd95),
        ];
        for (name, get) in metrics {
            let vals: Vec<f64> = per_seed.iter().map(get).collect();
            let _ = write!(s, "{split},{name}");
            for v in &vals {
                let _ = write!(s, ",{}", fmt_num(*v));
            }
            let finite: Vec<f64> = vals.iter().copied().filter(|v| !v.is_nan()).collect();
            let (m, sd) = if finite.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&finite) };
            let _ = writeln!(s, ",{},{}", fmt_num(m), fmt_num(sd));
        }
    }
    s
}

/// Per-channel entropy scores and the selected set of every gate, for the
/// first image: `gate,channel,entropy,selected`.
pub fn entropy_csv<S: Scalar>(trace: &ForwardTrace<S>) -> String {
    let mut s = String::from("gate,channel,entropy,selected\n");
    for (g, gate) in trace.gates.iter().enumerate() {
        let (Some(scores), Some(sel)) = (gate.scores.first(), gate.selections.first()) else { continue };
        for (c, e) in scores.scores.iter().enumerate() {
            let _ = writeln!(s, "{g},{c},{e},{}", sel.contains(&c) as u8);
        }
    }
    s
}

/// Grey PNG of the first image's attention map from gate `g`.
pub fn attention_png<S: Scalar>(trace: &ForwardTrace<S>, g: usize) -> Option<GrayImage> {
    let a = &trace.gates.get(g)?.attention;
    let (h, w) = (a.shape()[2], a.shape()[3]);
    Some(GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([(a.data()[y as usize * w + x as usize].as_f64().clamp(0.0, 1.0) * 255.0).round() as u8])
    }))
}

/// Evaluates one checkpoint on a split.
pub fn evaluate_checkpoint<S: Scalar>(cfg: &RunConfig, stem: &Path, samples: &[Sample]) -> Result<Vec<ImageScore>> {
    let manifest = checkpoint::read_manifest(stem)?;
    if !manifest.config.model.same_architecture(&cfg.model) {
        return Err(Error::Manifest(format!(
            "checkpoint {} was trained with a different model config",
            stem.display()
        )));
    }
    let (net, template) = SkipNet::build::<S>(manifest.config.model.clone())?;
    let ck = checkpoint::load(stem, &template)?;
    let preds = predict(&net, &ck.store, samples, cfg.train.batch_size)?;
    score(&preds, samples)
}
