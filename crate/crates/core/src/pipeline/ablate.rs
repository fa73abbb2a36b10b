use std::fmt::Write as _;
use std::path::Path;

use super::checkpoint;
use super::config::RunConfig;
use super::eval::{predict, score, summarize, SplitSummary};
use super::train::{train, TrainOptions, BEST};
use crate::error::{Error, Result};
use crate::numerics::Scalar;
use crate::skipnet::{BranchScale, ModelConfig, Setting, SkipNet};
use crate::synth::Sample;

/// Data shared by every ablation cell.
pub struct AblationData<'a> {
    pub train: &'a [Sample],
    pub val: &'a [Sample],
    pub seen: &'a [Sample],
    pub unseen: &'a [Sample],
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub model: ModelConfig,
    /// `K` requested before clamping to the grid.
    pub k_requested: usize,
    pub params: usize,
    pub seen: SplitSummary,
    pub unseen: SplitSummary,
}

impl AblationRow {
    pub fn k_clamped(&self) -> bool {
        self.model.k_neighbors != self.k_requested
    }

    fn metrics(&self) -> String {
        format!("{},{},{},{}", self.seen.dsc, self.seen.miou, self.unseen.dsc, self.unseen.miou)
    }
}

#[derive(Clone, Debug, Default)]
pub struct AblationReport {
    pub settings: Vec<AblationRow>,
    pub m_sweep: Vec<AblationRow>,
    pub resolution: Vec<AblationRow>,
    pub repetitions: Vec<AblationRow>,
}

/// Lowers `K` to the largest value the graph grid supports,
/// `⌊(N − 1) / d⌋`, when the requested one does not fit.
pub fn fit_neighbours(model: &mut ModelConfig) {
    if model.setting.scale() == BranchScale::None {
        return;
    }
    let (h, w) = model.graph_grid();
    let max_k = (h * w).saturating_sub(1) / model.dilation.max(1);
    model.k_neighbors = model.k_neighbors.min(max_k).max(1);
}

fn subset(s: &[Sample], n: usize) -> &[Sample] {
    if n == 0 || n >= s.len() {
        s
    } else {
        &s[..n]
    }
}

/// Trains and evaluates one configuration under `dir`.
pub fn run_cell<S: Scalar>(cfg: &RunConfig, model: ModelConfig, data: &AblationData, dir: &Path) -> Result<AblationRow> {
    let k_requested = model.k_neighbors;
    let mut model = model;
    fit_neighbours(&mut model);
    let mut run = cfg.clone();
    run.model = model.clone();
    run.train.epochs = cfg.ablation.epochs;
    run.output_dir = dir.to_path_buf();
    let a = &cfg.ablation;
    train::<S>(
        &run,
        subset(data.train, a.train_subset),
        data.val,
        dir,
        TrainOptions {
            quiet: true,
            ..TrainOptions::default()
        },
    )?;
    let (net, template) = SkipNet::build::<S>(model.clone())?;
    let ck = checkpoint::load(&dir.join(BEST), &template)?;
    let eval = |split: &[Sample]| -> Result<SplitSummary> {
        let split = subset(split, a.eval_subset);
        Ok(summarize(&score(&predict(&net, &ck.store, split, run.train.batch_size)?, split)?))
    };
    Ok(AblationRow {
        params: ck.store.num_scalars(),
        k_requested,
        seen: eval(data.seen)?,
        unseen: eval(data.unseen)?,
        model,
    })
}

/// Runs the setting grid and the M, resolution and repetition sweeps,
/// writing one CSV per study into `out_dir`.
pub fn ablate<S: Scalar>(cfg: &RunConfig, data: &AblationData, out_dir: &Path) -> Result<AblationReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    cfg.save(out_dir.join("config.toml"))?;
    let a = &cfg.ablation;
    let base = ModelConfig {
        setting: Setting::S4,
        ..cfg.model.clone()
    };
    let cells = out_dir.join("cells");
    let mut report = AblationReport::default();
    let progress = |what: &str| eprintln!("ablation: {what}");

    for &setting in &a.settings {
        progress(setting.name());
        let m = ModelConfig { setting, ..base.clone() };
        report.settings.push(run_cell::<S>(cfg, m, data, &cells.join(setting.name()))?);
    }
    write_csv(&out_dir.join("settings.csv"), &settings_csv(&report.settings))?;

    for &mv in &a.m_values {
        progress(&format!("M = {mv}"));
        let m = ModelConfig {
            selected_channels: mv,
            ..base.clone()
        };
        report.m_sweep.push(run_cell::<S>(cfg, m, data, &cells.join(format!("m{mv}")))?);
    }
    write_csv(&out_dir.join("m_sweep.csv"), &m_sweep_csv(&report.m_sweep))?;

    for &sv in &a.target_scales {
        progress(&format!("s = {sv}"));
        let m = ModelConfig {
            target_scale: sv,
            ..base.clone()
        };
        report.resolution.push(run_cell::<S>(cfg, m, data, &cells.join(format!("s{sv}")))?);
    }
    write_csv(&out_dir.join("resolution.csv"), &resolution_csv(&report.resolution))?;

    for &g in &a.repetitions {
        progress(&format!("G = {g}"));
        let m = ModelConfig {
            repetitions: g,
            ..base.clone()
        };
        report.repetitions.push(run_cell::<S>(cfg, m, data, &cells.join(format!("g{g}")))?);
    }
    write_csv(&out_dir.join("repetitions.csv"), &repetitions_csv(&report.repetitions))?;
    Ok(report)
}

fn write_csv(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

const METRIC_HEADER: &str = "seen_dsc,seen_miou,unseen_dsc,unseen_miou";

pub fn settings_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("setting,single_scale,cross_scale,node_attention,params,{METRIC_HEADER}\n");
    for r in rows {
        let st = r.model.setting;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            st.name(),
            (st.scale() == BranchScale::Single) as u8,
            (st.scale() == BranchScale::Cross) as u8,
            st.node_attention() as u8,
            r.params,
            r.metrics()
        );
    }
    s
}

pub fn m_sweep_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("m,selection,params,{METRIC_HEADER}\n");
    for r in rows {
        let all = r.model.effective_selected() == r.model.branch_channels();
        let tag = if all { "non-selective" } else { "selective" };
        let _ = writeln!(s, "{},{tag},{},{}", r.model.selected_channels, r.params, r.metrics());
    }
    s
}

pub fn resolution_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("s,grid_h,grid_w,k_requested,k_used,params,{METRIC_HEADER}\n");
    for r in rows {
        let (h, w) = r.model.target_resolution();
        let _ = writeln!(
            s,
            "{},{h},{w},{},{},{},{}",
            r.model.target_scale,
            r.k_requested,
            r.model.k_neighbors,
            r.params,
            r.metrics()
        );
    }
    s
}

pub fn repetitions_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("g,params,{METRIC_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.model.repetitions, r.params, r.metrics());
    }
    s
}
