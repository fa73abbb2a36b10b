use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 1
seeds = [1]
output_dir = "runs/tiny"

[model]
reduced_channels = 8
k_neighbors = 5
selected_channels = 8

[train]
epochs = 1
batch_size = 4

[corpus]
train = 8
val = 4
test = 4

[ablation]
settings = ["S0", "S4"]
m_values = [8, 32]
target_scales = [3]
repetitions = [1]
epochs = 1
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skipgraph"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn end_to_end_on_a_tiny_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tiny.toml"), CONFIG).unwrap();
    let cfg = ["--config", "tiny.toml"];

    let gen = ok(dir, &[&cfg[..], &["gen-data"]].concat());
    assert!(gen.contains("train: 8 samples") && gen.contains("test_unseen: 4 samples"));
    assert!(dir.join("data/test_seen/manifest.json").exists());

    ok(dir, &[&cfg[..], &["train"]].concat());
    let run_dir = dir.join("runs/tiny/seed1");
    assert!(run_dir.join("best.atns").exists() && run_dir.join("config.toml").exists());

    let summary = ok(dir, &[&cfg[..], &["eval", "--dump-attention"]].concat());
    assert!(summary.starts_with("split,metric,seed_1,mean,std"));
    for f in ["eval_per_image.csv", "eval_summary.csv", "entropy.csv", "attention.png"] {
        assert!(dir.join("runs/tiny").join(f).exists(), "{f}");
    }
    let per_image = std::fs::read_to_string(dir.join("runs/tiny/eval_per_image.csv")).unwrap();
    assert_eq!(per_image.lines().count(), 1 + 2 * 4);

    ok(dir, &[&cfg[..], &["viz-graph", "--checkpoint", "runs/tiny/seed1/best", "--out", "viz/g"]].concat());
    let dump: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("viz/g.json")).unwrap()).unwrap();
    assert_eq!(dump["edges"].as_array().unwrap().len(), 15);
    assert!(dir.join("viz/g.png").exists());

    ok(dir, &[&cfg[..], &["ablate"]].concat());
    let settings = std::fs::read_to_string(dir.join("runs/tiny/ablation/settings.csv")).unwrap();
    assert_eq!(settings.lines().count(), 3);

    // Bad seed coordinates and an out-of-grid seed are argument errors.
    let bad = run(dir, &[&cfg[..], &["viz-graph", "--checkpoint", "runs/tiny/seed1/best", "--seeds", "9:9"]].concat());
    assert_eq!(bad.status.code(), Some(1));
    let bad = run(dir, &[&cfg[..], &["viz-graph", "--checkpoint", "runs/tiny/seed1/best", "--seeds", "x"]].concat());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn invalid_configs_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.toml"), "[model]\ninput_size = [48, 64]\n").unwrap();
    std::fs::write(dir.join("typo.toml"), "[train]\nepoch = 3\n").unwrap();
    for file in ["bad.toml", "typo.toml", "missing.toml"] {
        let out = run(dir, &["--config", file, "gen-data"]);
        assert_eq!(out.status.code(), Some(1), "{file}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    // Training without a corpus.
    assert_eq!(run(dir, &["train"]).status.code(), Some(1));
}
