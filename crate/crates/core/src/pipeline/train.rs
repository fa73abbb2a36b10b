use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint;
use super::config::RunConfig;
use super::corpus::{image_to_png, mask_to_png, stack};
use super::eval::{predict, score};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossBreakdown, SupervisionTargets};
use crate::numerics::{ParamStore, Scalar, Session, Var};
use crate::optim::{cosine_lr, Adam};
use crate::skipnet::SkipNet;
use crate::synth::{augment, rescale, Sample};

pub const LOG_FILE: &str = "train_log.csv";
pub const BEST: &str = "best";
pub const LAST: &str = "last";

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Batch means of each loss component.
    pub loss: LossBreakdown,
    pub val_dsc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best_val_dsc: f64,
    pub log: Vec<EpochLog>,
    pub out_dir: PathBuf,
}

/// Options beyond the run config.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions {
    /// Continue from `<out>/last` if it exists.
    pub resume: bool,
    /// Stop after this many epochs in total (used to interrupt runs).
    pub stop_after: Option<usize>,
    pub quiet: bool,
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// Writes the offending batch for inspection after a non-finite loss.
fn dump_batch(dir: &Path, indices: &[usize], batch: &[Sample], what: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (s, &i) in batch.iter().zip(indices) {
        image_to_png(&s.image)?
            .save(dir.join(format!("{i:04}_image.png")))
            .map_err(|e| Error::Format(e.to_string()))?;
        mask_to_png(&s.mask)?
            .save(dir.join(format!("{i:04}_mask.png")))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    let note = serde_json::json!({ "indices": indices, "error": what });
    let path = dir.join("batch.json");
    std::fs::write(&path, note.to_string()).map_err(|e| Error::io(&path, e))?;
    Ok(dir.to_path_buf())
}

fn log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,lr,loss_total,loss_iou,loss_bce,loss_boundary,val_dsc\n");
    for e in log {
        let _ = writeln!(
            s,
            "{},{:e},{},{},{},{},{}",
            e.epoch,
            e.lr,
            e.loss.total(),
            e.loss.iou,
            e.loss.bce,
            e.loss.boundary,
            e.val_dsc
        );
    }
    s
}

fn parse_log(text: &str) -> Vec<EpochLog> {
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| f.get(i)?.parse::<f64>().ok();
            Some(EpochLog {
                epoch: f.first()?.parse().ok()?,
                lr: num(1)?,
                loss: LossBreakdown {
                    iou: num(3)?,
                    bce: num(4)?,
                    boundary: num(5)?,
                },
                val_dsc: num(6)?,
            })
        })
        .collect()
}

/// Mean validation DSC of `net` in inference mode.
pub fn validate<S: Scalar>(net: &SkipNet, store: &ParamStore<S>, val: &[Sample], batch: usize) -> Result<f64> {
    if val.is_empty() {
        return Ok(0.0);
    }
    let preds = predict(net, store, val, batch)?;
    let rows = score(&preds, val)?;
    Ok(rows.iter().map(|r| r.dsc).sum::<f64>() / rows.len() as f64)
}

/// Trains one model (one seed) and writes `config.toml`, `train_log.csv`,
/// `best.{atns,json}` (highest validation DSC) and `last.{atns,json}`
/// (resume point) under `out_dir`.
pub fn train<S: Scalar>(
    cfg: &RunConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    out_dir: &Path,
    opts: TrainOptions,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    cfg.save(out_dir.join("config.toml"))?;

    let (net, fresh) = SkipNet::build::<S>(cfg.model.clone())?;
    let last = out_dir.join(LAST);
    let (mut store, mut adam, start, mut best, mut log) = if opts.resume && checkpoint::paths(&last).1.exists() {
        let ck = checkpoint::load(&last, &fresh)?;
        if ck.manifest.config != *cfg {
            return Err(Error::Manifest("resume checkpoint was written with a different config".into()));
        }
        let adam = ck
            .adam
            .ok_or_else(|| Error::Manifest("resume checkpoint has no optimizer state".into()))?;
        let log_path = out_dir.join(LOG_FILE);
        let mut log = std::fs::read_to_string(&log_path)
            .map(|t| parse_log(&t))
            .unwrap_or_default();
        log.retain(|e| e.epoch < ck.manifest.epoch);
        (ck.store, adam, ck.manifest.epoch, ck.manifest.best_val_dsc, log)
    } else {
        let adam = Adam::new(cfg.optimizer.clone(), &fresh)?;
        (fresh, adam, 0, f64::NEG_INFINITY, Vec::new())
    };

    let epochs = cfg.train.epochs;
    let end = opts.stop_after.map_or(epochs, |s| s.min(epochs));
    let bs = cfg.train.batch_size;
    for epoch in start..end {
        let lr = cosine_lr(cfg.optimizer.lr, cfg.optimizer.lr_min, epoch, epochs);
        let mut rng = epoch_rng(cfg.seed, epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for (bi, idx) in order.chunks(bs).enumerate() {
            let size = cfg.train.augment.batch_size_for(cfg.model.input_size, &mut rng);
            let batch = idx
                .iter()
                .map(|&i| rescale(&augment(&train_set[i], &cfg.train.augment, &mut rng), size))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Sample> = batch.iter().collect();
            let (x, mask) = stack::<S>(&refs)?;
            let targets = SupervisionTargets::from_mask(mask)?;

            let session = Session::train(&store);
            let step = net
                .forward(&session, &Var::constant(x))
                .and_then(|out| total_loss(&out, &targets));
            let (loss, parts) = match step {
                Ok((loss, parts)) if parts.total().is_finite() => (loss, parts),
                Ok((_, parts)) => {
                    let what = format!("non-finite loss {parts:?}");
                    let dir = dump_batch(&out_dir.join(format!("nan_dump/epoch{epoch}_batch{bi}")), idx, &batch, &what)?;
                    return Err(Error::Numeric(format!("{what} at epoch {epoch}, batch {bi}; batch saved to {}", dir.display())));
                }
                Err(Error::Numeric(what)) => {
                    let dir = dump_batch(&out_dir.join(format!("nan_dump/epoch{epoch}_batch{bi}")), idx, &batch, &what)?;
                    return Err(Error::Numeric(format!("{what} at epoch {epoch}, batch {bi}; batch saved to {}", dir.display())));
                }
                Err(e) => return Err(e),
            };
            loss.backward();
            let grads = session.gradients();
            let stats = session.take_stat_updates();
            drop(session);
            adam.update(&mut store, &grads, lr)?;
            store.apply_stat_updates(stats)?;
            sum.iou += parts.iou;
            sum.bce += parts.bce;
            sum.boundary += parts.boundary;
            batches += 1;
        }
        let n = batches as f64;
        let mean = LossBreakdown {
            iou: sum.iou / n,
            bce: sum.bce / n,
            boundary: sum.boundary / n,
        };
        let val_dsc = validate(&net, &store, val_set, bs)?;
        log.push(EpochLog {
            epoch,
            lr,
            loss: mean,
            val_dsc,
        });
        if !opts.quiet {
            eprintln!(
                "epoch {:>3}/{epochs}  lr {lr:.2e}  loss {:.4}  val dsc {val_dsc:.4}",
                epoch + 1,
                mean.total()
            );
        }
        if val_dsc > best {
            best = val_dsc;
            checkpoint::save(&out_dir.join(BEST), cfg, &store, None, epoch + 1, best)?;
        }
        checkpoint::save(&last, cfg, &store, Some(&adam), epoch + 1, best)?;
        let log_path = out_dir.join(LOG_FILE);
        std::fs::write(&log_path, log_csv(&log)).map_err(|e| Error::io(&log_path, e))?;
    }
    Ok(TrainOutcome {
        best_val_dsc: best,
        log,
        out_dir: out_dir.to_path_buf(),
    })
}
