//! Finite-difference check of the full model's reverse-mode gradients
//! (small widths, f64). Takes about half a minute.

use std::time::Instant;

use skipgraph::losses::{total_loss, SupervisionTargets};
use skipgraph::numerics::{grad_check, GradCheckOptions, Probe, Var};
use skipgraph::pipeline::corpus::stack;
use skipgraph::skipnet::{ModelConfig, SkipNet};
use skipgraph::synth::{generate, SynthSpec};

fn main() -> skipgraph::Result<()> {
    let cfg = ModelConfig {
        reduced_channels: 8,
        k_neighbors: 5,
        selected_channels: 8,
        ..ModelConfig::default()
    };
    let (net, mut store) = SkipNet::build::<f64>(cfg)?;
    let samples = generate(&SynthSpec { count: 2, ..SynthSpec::default() })?;
    let (x, mask) = stack::<f64>(&samples.iter().collect::<Vec<_>>())?;
    let targets = SupervisionTargets::from_mask(mask)?;

    // Graph topology, ReLU patterns and max-pool winners are frozen on the
    // first evaluation, so every perturbed replay stays on one linear piece.
    let opts = GradCheckOptions {
        eps: 1e-3,
        probe: Probe::Sampled(4),
        directional: true,
        richardson: true,
        seed: 7,
    };
    let start = Instant::now();
    let report = grad_check(&mut store, &opts, |s| {
        let out = net.forward(s, &Var::constant(x.clone()))?;
        Ok(total_loss(&out, &targets)?.0)
    })?;

    let mut worst: Vec<_> = report.params.iter().collect();
    worst.sort_by(|a, b| b.worst().total_cmp(&a.worst()));
    for p in worst.iter().take(5) {
        println!("{:40} {:.2e}", p.name, p.worst());
    }
    println!(
        "{} tensors, max relative error {:.2e}, {:.1} s",
        report.params.len(),
        report.max_rel_error(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
