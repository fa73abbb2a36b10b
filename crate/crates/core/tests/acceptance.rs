//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs single-threaded; criteria 7 and 8 train real networks and dominate
//! the runtime (about ten minutes on one core).

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skipgraph::efs::{bottom_m_select, channel_entropy};
use skipgraph::losses::{bce, boundary_from_mask, total_loss, weight_map, weighted_bce, weighted_iou, SupervisionTargets};
use skipgraph::metrics::{dsc, hd95, mae, miou, ConfusionCounts, Mask};
use skipgraph::numerics::{grad_check, DType, GradCheckOptions, Probe, Session, Tensor, Var};
use skipgraph::patchgraph::{build_dilated_knn, node_attention};
use skipgraph::pipeline::ablate::{ablate, AblationData};
use skipgraph::pipeline::corpus::{generate_splits, stack};
use skipgraph::pipeline::eval::{evaluate_checkpoint, summarize};
use skipgraph::pipeline::train::{train, TrainOptions, BEST, LAST, LOG_FILE};
use skipgraph::pipeline::RunConfig;
use skipgraph::skipnet::{postprocess, DeepOutputs, ModelConfig, Setting, SkipNet};
use skipgraph::synth::{generate, SynthSpec};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1. Finite-difference check of every parameter of the full model.
fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig {
        reduced_channels: 8,
        k_neighbors: 5,
        selected_channels: 8,
        ..ModelConfig::default()
    };
    let (net, mut store) = SkipNet::build::<f64>(cfg).map_err(fail)?;
    let samples = generate(&SynthSpec {
        count: 2,
        ..SynthSpec::default()
    })
    .map_err(fail)?;
    let refs: Vec<_> = samples.iter().collect();
    let (x, mask) = stack::<f64>(&refs).map_err(fail)?;
    let targets = SupervisionTargets::from_mask(mask).map_err(fail)?;
    let opts = GradCheckOptions {
        eps: 1e-3,
        probe: Probe::Sampled(4),
        directional: true,
        richardson: true,
        seed: 7,
    };
    let report = grad_check(&mut store, &opts, |s| {
        let out = net.forward(s, &Var::constant(x.clone()))?;
        Ok(total_loss(&out, &targets)?.0)
    })
    .map_err(fail)?;
    let secs = start.elapsed().as_secs_f64();
    let worst = report.worst_param().map_or("-".into(), |p| p.name.clone());
    let err = report.max_rel_error();
    let covered = report.params.len() == store.params().len();
    check(
        err <= 1e-5 && secs < 300.0 && covered,
        format!(
            "max rel err {err:.2e} (worst {worst}) over {}/{} tensors in {secs:.1} s; tol 1e-5, limit 300 s",
            report.params.len(),
            store.params().len()
        ),
    )
}

/// 2. Dilated KNN against the all-pairs oracle, with forced ties.
fn graph_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ties = 0;
    for case in 0..200 {
        let k = rng.random_range(1..=16usize);
        let d = rng.random_range(1..=3usize);
        let n = rng.random_range(k * d + 1..=256);
        let c = rng.random_range(1..=8usize);
        let mut feats: Vec<f64> = (0..c * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if case % 2 == 0 {
            // Copy whole columns and quantise so many distances coincide.
            ties += 1;
            for v in feats.iter_mut() {
                *v = (*v * 2.0).round();
            }
            for _ in 0..n / 3 {
                let (src, dst) = (rng.random_range(0..n), rng.random_range(0..n));
                for ch in 0..c {
                    feats[ch * n + dst] = feats[ch * n + src];
                }
            }
        }
        let t = Tensor::new(&[c, n], feats.clone()).map_err(fail)?;
        let graph = build_dilated_knn(&t, k, d).map_err(fail)?;
        let oracle = common::knn_oracle(&feats, c, n, k, d);
        for (i, row) in oracle.iter().enumerate() {
            if graph.row(i) != row.as_slice() {
                return Err(format!("case {case} (N={n}, K={k}, d={d}) row {i}: {:?} vs {row:?}", graph.row(i)));
            }
        }
    }
    Ok(format!("200/200 instances exact ({ties} with duplicated vectors), N ≤ 256, K ≤ 16, d ≤ 3"))
}

/// 3. Entropy bounds, the zero-feature value and exhaustive Bottom-M.
fn entropy_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bound = (-1.0f64).exp() + 1e-9;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let (c, h, w) = (rng.random_range(1..=8), rng.random_range(1..=6), rng.random_range(1..=6));
        let scale = [0.1, 1.0, 10.0, 100.0][rng.random_range(0..4)];
        let t = Tensor::<f64>::from_fn(&[1, c, h, w], |_| rng.random_range(-scale..scale)).map_err(fail)?;
        let scores = channel_entropy(&t).map_err(fail)?;
        for (ch, &s) in scores[0].scores.iter().enumerate() {
            let want = common::entropy_oracle(&t.data()[ch * h * w..(ch + 1) * h * w]);
            if (s - want).abs() > 1e-12 {
                return Err(format!("score {s} differs from oracle {want}"));
            }
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    if lo < 0.0 || hi > bound {
        return Err(format!("scores span [{lo}, {hi}], outside [0, 1/e + 1e-9]"));
    }
    let zero = Tensor::<f64>::zeros(&[1, 4, 5, 5]).map_err(fail)?;
    let zero_err = channel_entropy(&zero).map_err(fail)?[0]
        .scores
        .iter()
        .map(|s| (s - 0.5 * 2f64.ln()).abs())
        .fold(0.0, f64::max);
    if zero_err > 1e-9 {
        return Err(format!("zero features give entropy off by {zero_err:e}"));
    }
    let mut subsets = 0;
    for trial in 0..300 {
        let c = rng.random_range(1..=8usize);
        // Every third trial draws from a coarse grid to force equal scores.
        let scores: Vec<f64> = (0..c)
            .map(|_| {
                if trial % 3 == 0 {
                    rng.random_range(0..4) as f64 / 8.0
                } else {
                    rng.random_range(0.0..0.37)
                }
            })
            .collect();
        for m in 1..=c {
            let got = bottom_m_select(&scores, m).map_err(fail)?;
            let want = common::bottom_m_oracle(&scores, m);
            if got != want {
                return Err(format!("bottom-{m} of {scores:?}: {got:?} vs exhaustive {want:?}"));
            }
            subsets += 1;
        }
    }
    Ok(format!(
        "1000 tensors in [{:.3e}, {hi:.6}] ≤ 1/e+1e-9; zero map err {zero_err:.1e}; {subsets} Bottom-M selections match exhaustive search",
        lo + 0.0
    ))
}

/// 4. Residual identities of the skip reconstruction, the FFN and node attention.
fn residual_identities() -> Outcome {
    let cfg = ModelConfig {
        reduced_channels: 8,
        k_neighbors: 5,
        selected_channels: 8,
        ..ModelConfig::default()
    };
    let (net, mut store) = SkipNet::build::<f64>(cfg).map_err(fail)?;
    let samples = generate(&SynthSpec {
        count: 2,
        ..SynthSpec::default()
    })
    .map_err(fail)?;
    let refs: Vec<_> = samples.iter().collect();
    let (x, _) = stack::<f64>(&refs).map_err(fail)?;
    let x = Var::constant(x);

    // Zero branch output: every enhanced skip equals its reduced map.
    let (skip_same, branch_shape) = {
        let s = Session::train(&store);
        let pre = net.preprocess(&s, &net.encode(&s, &x).map_err(fail)?).map_err(fail)?;
        let zero = Var::constant(Tensor::zeros(pre.cross.shape()).map_err(fail)?);
        let skips = postprocess(&zero, &pre.reduced).map_err(fail)?;
        let same = skips.iter().zip(&pre.reduced).all(|(a, b)| bitwise_eq(a.data(), b.data()));
        (same, pre.cross.shape().to_vec())
    };

    // Zero final FFN conv: block output equals the refined features.
    let (block, _) = &net.branch_layers()[0];
    store.param_mut(block.ffn_out_weight()).value.data_mut().fill(0.0);
    let ffn_same = {
        let s = Session::train(&store);
        let input = Var::constant(Tensor::<f64>::from_fn(&branch_shape, |i| ((i * 37 % 101) as f64 / 50.0) - 1.0).map_err(fail)?);
        let (out, trace) = block.forward(&s, &input).map_err(fail)?;
        bitwise_eq(out.data(), trace.refined.data())
    };

    // Zero node-attention kernel: output is exactly half the input.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xg = Tensor::<f64>::from_fn(&[2, 16, 64], |_| rng.random_range(-3.0..3.0)).map_err(fail)?;
    let kernel = Var::constant(Tensor::zeros(&[1, 1, 3]).map_err(fail)?);
    let gated = node_attention(&Var::constant(xg.clone()), &kernel).map_err(fail)?;
    let half_err = gated
        .data()
        .iter()
        .zip(xg.data())
        .map(|(g, v)| (g - 0.5 * v).abs())
        .fold(0.0, f64::max);

    check(
        skip_same && ffn_same && half_err <= 1e-7,
        format!("zero branch ⇒ skips == reduced maps bitwise: {skip_same}; zero FFN conv ⇒ output == refined bitwise: {ffn_same}; zero attention ⇒ |out − x/2| ≤ {half_err:.1e} (tol 1e-7)"),
    )
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// 5. Loss terms against loop oracles.
fn loss_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut wmin, mut wmax) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..100 {
        let (b, h, w) = (rng.random_range(1..=3), rng.random_range(4..=40), rng.random_range(4..=40));
        let plane = h * w;
        // Blocky masks so boundaries and window averages are nontrivial.
        let (cy, cx, r) = (rng.random_range(0..h) as f64, rng.random_range(0..w) as f64, rng.random_range(1.0..12.0));
        let mask = Tensor::<f64>::from_fn(&[b, 1, h, w], |i| {
            let (y, x) = (((i % plane) / w) as f64, (i % w) as f64);
            let on = (y - cy).powi(2) + (x - cx).powi(2) < r * r;
            (on ^ (rng.random_range(0.0..1.0) < 0.05)) as u8 as f64
        })
        .map_err(fail)?;
        let pred = Tensor::<f64>::from_fn(&[b, 1, h, w], |_| rng.random_range(1e-9..1.0)).map_err(fail)?;
        let edge_pred = Tensor::<f64>::from_fn(&[b, 1, h, w], |_| rng.random_range(1e-3..1.0 - 1e-3)).map_err(fail)?;

        let weight = weight_map(&mask).map_err(fail)?;
        let edges = boundary_from_mask(&mask).map_err(fail)?;
        let (mut w_oracle, mut e_oracle) = (Vec::new(), Vec::new());
        for item in 0..b {
            let m = &mask.data()[item * plane..(item + 1) * plane];
            w_oracle.extend(common::weight_oracle(m, h, w));
            e_oracle.extend(common::sobel_oracle(m, h, w));
        }
        if edges.data() != e_oracle.as_slice() {
            return Err("boundary targets differ from the Sobel oracle".into());
        }
        for (&a, &o) in weight.data().iter().zip(&w_oracle) {
            worst = worst.max((a - o).abs());
            wmin = wmin.min(a);
            wmax = wmax.max(a);
        }
        let p = Var::constant(pred.clone());
        let pairs = [
            (
                weighted_bce(&p, &mask, &weight).map_err(fail)?,
                common::weighted_bce_oracle(pred.data(), mask.data(), &w_oracle, b),
            ),
            (
                weighted_iou(&p, &mask, &weight).map_err(fail)?,
                common::weighted_iou_oracle(pred.data(), mask.data(), &w_oracle, b),
            ),
            (
                bce(&Var::constant(edge_pred.clone()), &edges).map_err(fail)?,
                common::weighted_bce_oracle(edge_pred.data(), &e_oracle, &vec![1.0; b * plane], b),
            ),
        ];
        for (got, want) in pairs {
            worst = worst.max((got.value().item() - want).abs());
        }
    }
    let samples = generate(&SynthSpec {
        count: 2,
        ..SynthSpec::default()
    })
    .map_err(fail)?;
    let refs: Vec<_> = samples.iter().collect();
    let (_, mask) = stack::<f64>(&refs).map_err(fail)?;
    let targets = SupervisionTargets::from_mask(mask).map_err(fail)?;
    let region = Var::constant(targets.region.clone());
    let boundary = Var::constant(targets.boundary.clone());
    let perfect = DeepOutputs {
        region: std::array::from_fn(|_| region.clone()),
        boundary: std::array::from_fn(|_| boundary.clone()),
    };
    let perfect_loss = total_loss(&perfect, &targets).map_err(fail)?.0.value().item();
    check(
        worst <= 1e-10 && wmin >= 1.0 && wmax <= 6.0 && perfect_loss <= 1e-4,
        format!(
            "100 instances, max |lib − oracle| {worst:.1e} (tol 1e-10); ω ∈ [{wmin:.3}, {wmax:.3}] ⊆ [1, 6]; perfect-prediction loss {perfect_loss:.2e} (≤ 1e-4)"
        ),
    )
}

/// 6. Metrics against counting and all-pairs oracles.
fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut hd_worst = 0.0f64;
    let mut hd_cases = 0;
    for i in 0..1000 {
        let (h, w) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let density = rng.random_range(0.0..0.6);
        let a: Vec<bool> = (0..h * w).map(|_| rng.random_range(0.0..1.0) < density).collect();
        let b: Vec<bool> = (0..h * w).map(|_| rng.random_range(0.0..1.0) < density).collect();
        let (ma, mb) = (Mask::new(h, w, a.clone()).map_err(fail)?, Mask::new(h, w, b.clone()).map_err(fail)?);
        let (tp, fp, fn_, tn) = common::confusion_oracle(&a, &b);
        let counts = ConfusionCounts::from_masks(&ma, &mb).map_err(fail)?;
        if (counts.tp, counts.fp, counts.fn_, counts.tn) != (tp, fp, fn_, tn) {
            return Err(format!("pair {i}: confusion counts differ"));
        }
        let d = dsc(&ma, &mb).map_err(fail)?;
        let j = miou(&ma, &mb).map_err(fail)?;
        let (want_d, want_j) = if tp + fp + fn_ == 0 {
            (1.0, 1.0)
        } else {
            ((2 * tp) as f64 / (2 * tp + fp + fn_) as f64, tp as f64 / (tp + fp + fn_) as f64)
        };
        if d != want_d || j != want_j || d < j {
            return Err(format!("pair {i}: dsc {d} miou {j} vs oracle {want_d} {want_j}"));
        }
        let pa: Vec<f64> = a.iter().map(|&v| v as u8 as f64 * rng.random_range(0.5..1.0)).collect();
        let pb: Vec<f64> = b.iter().map(|&v| v as u8 as f64).collect();
        let want_mae = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / (h * w) as f64;
        if mae(&pa, &pb).map_err(fail)? != want_mae {
            return Err(format!("pair {i}: MAE differs from oracle"));
        }
        if a.contains(&true) && b.contains(&true) {
            let got = hd95(&ma, &mb).map_err(fail)?;
            hd_worst = hd_worst.max((got - common::hd95_oracle(&a, &b, w)).abs());
            hd_cases += 1;
        }
    }
    check(
        hd_worst <= 1e-9,
        format!("1000 pairs: DSC/mIoU/MAE exact, dsc ≥ miou everywhere; HD95 max |err| {hd_worst:.1e} over {hd_cases} pairs (tol 1e-9)"),
    )
}

/// Resolved config for the desk-scale runs. lr is the 1e-3 recipe value;
/// see the notes in the README on why the 1e-4 default is not used here.
fn desk_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default().with_seed(seed);
    cfg.model.reduced_channels = 16;
    cfg.model.k_neighbors = 11;
    cfg.model.selected_channels = 16;
    cfg.optimizer.lr = 1e-3;
    cfg
}

/// 7. Full model, 60 epochs, three seeds.
fn desk_learning(root: &Path) -> Outcome {
    let start = Instant::now();
    let base = desk_config(1);
    let splits = generate_splits(&base.corpus).map_err(fail)?;
    let (mut seen, mut unseen) = (Vec::new(), Vec::new());
    for seed in [1, 2, 3] {
        let cfg = desk_config(seed);
        let dir = root.join(format!("seed{seed}"));
        train::<f32>(&cfg, &splits.train.1, &splits.val.1, &dir, TrainOptions { quiet: true, ..Default::default() })
            .map_err(fail)?;
        let best = dir.join(BEST);
        seen.push(summarize(&evaluate_checkpoint::<f32>(&cfg, &best, &splits.test_seen.1).map_err(fail)?).dsc);
        unseen.push(summarize(&evaluate_checkpoint::<f32>(&cfg, &best, &splits.test_unseen.1).map_err(fail)?).dsc);
        eprintln!("criterion 7: seed {seed} seen {:.4} unseen {:.4}", seen.last().unwrap(), unseen.last().unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (s, u) = (mean(&seen), mean(&unseen));
    let mins = start.elapsed().as_secs_f64() / 60.0;
    check(
        s >= 0.90 && u >= 0.80 && mins < 30.0,
        format!("mean DSC seen {s:.4} (≥ 0.90), unseen {u:.4} (≥ 0.80) over seeds 1,2,3; {mins:.1} min (< 30)"),
    )
}

/// 8. The ablation grid at a one-epoch budget: completion, CSV shape, orderings.
fn ablation_harness(root: &Path) -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.ablation.epochs = 1;
    cfg.ablation.train_subset = 16;
    cfg.ablation.eval_subset = 8;
    let splits = generate_splits(&cfg.corpus).map_err(fail)?;
    let data = AblationData {
        train: &splits.train.1,
        val: &splits.val.1[..8],
        seen: &splits.test_seen.1,
        unseen: &splits.test_unseen.1,
    };
    let report = ablate::<f32>(&cfg, &data, root).map_err(fail)?;

    let rows = |file: &str| -> Result<Vec<String>, String> {
        let text = std::fs::read_to_string(root.join(file)).map_err(fail)?;
        Ok(text.lines().map(str::to_owned).collect())
    };
    for (file, n) in [("settings.csv", 5), ("m_sweep.csv", 6), ("resolution.csv", 4), ("repetitions.csv", 3)] {
        let lines = rows(file)?;
        if lines.len() != n + 1 {
            return Err(format!("{file}: {} data rows, expected {n}", lines.len() - 1));
        }
    }
    let p: Vec<usize> = report.settings.iter().map(|r| r.params).collect();
    let by_setting = |s: Setting| report.settings.iter().find(|r| r.model.setting == s).map(|r| r.params);
    let [s0, s1, s2, s3, s4] = Setting::ALL.map(|s| by_setting(s).unwrap_or(0));
    let settings_ok = s0 < s1 && s1 <= s2 && s2 < s3 && s3 <= s4;
    let att_k = cfg.model.attention_kernel;
    let s2_minus_s1 = s2 - s1;
    let g: Vec<usize> = report.repetitions.iter().map(|r| r.params).collect();
    let g_ok = g.windows(2).all(|w| w[0] < w[1]);
    let m_lines = rows("m_sweep.csv")?;
    let flag_ok = m_lines[1..].iter().all(|l| l.starts_with("256,") == l.contains("non-selective"));
    check(
        settings_ok && g_ok && flag_ok && s2_minus_s1 == att_k,
        format!(
            "all 18 cells ran; S0..S4 params {p:?} (S2 − S1 = {s2_minus_s1}, kernel {att_k}); G=1,3,5 params {g:?}; M=256 flagged non-selective: {flag_ok}"
        ),
    )
}

/// 9. Bitwise repeatability and exact resume in f64.
fn determinism(root: &Path) -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.model.reduced_channels = 8;
    cfg.model.k_neighbors = 5;
    cfg.model.selected_channels = 8;
    cfg.train.epochs = 2;
    cfg.train.precision = DType::F64;
    cfg.corpus.train = 16;
    cfg.corpus.val = 8;
    cfg.corpus.test = 8;
    let splits = generate_splits(&cfg.corpus).map_err(fail)?;
    let quiet = TrainOptions { quiet: true, ..Default::default() };
    let run = |name: &str, opts: TrainOptions| -> Result<std::path::PathBuf, String> {
        let dir = root.join(name);
        train::<f64>(&cfg, &splits.train.1, &splits.val.1, &dir, opts).map_err(fail)?;
        Ok(dir)
    };
    let a = run("a", quiet)?;
    let b = run("b", quiet)?;
    let c = run("c", TrainOptions { stop_after: Some(1), ..quiet })?;
    run("c", TrainOptions { resume: true, ..quiet })?;

    let bytes = |dir: &Path, file: &str| std::fs::read(dir.join(file)).unwrap_or_default();
    let same_files = |x: &Path, y: &Path| {
        ["best.atns", "best.json", "last.atns", "last.json", LOG_FILE]
            .iter()
            .all(|f| !bytes(x, f).is_empty() && bytes(x, f) == bytes(y, f))
    };
    let metrics = |dir: &Path| -> Result<String, String> {
        let rows = evaluate_checkpoint::<f64>(&cfg, &dir.join(LAST), &splits.test_seen.1).map_err(fail)?;
        Ok(format!("{rows:?}"))
    };
    let repeat = same_files(&a, &b) && metrics(&a)? == metrics(&b)?;
    let resumed = same_files(&a, &c) && metrics(&a)? == metrics(&c)?;
    check(
        repeat && resumed,
        format!("two runs byte-identical (checkpoints, log, metrics): {repeat}; 1 epoch + resume == uninterrupted 2 epochs: {resumed}"),
    )
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let root = scratch.path();
    let criteria: [Criterion; 9] = [
        ("gradient integrity", Box::new(gradient_integrity)),
        ("graph oracle", Box::new(graph_oracle)),
        ("entropy properties", Box::new(entropy_properties)),
        ("residual identities", Box::new(residual_identities)),
        ("loss oracles", Box::new(loss_oracles)),
        ("metric oracles", Box::new(metric_oracles)),
        ("desk-scale learning", Box::new(|| desk_learning(&root.join("desk")))),
        ("ablation harness", Box::new(|| ablation_harness(&root.join("ablation")))),
        ("determinism", Box::new(|| determinism(&root.join("determinism")))),
    ];
    // `cargo test --test acceptance -- 2 5` runs a subset.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
