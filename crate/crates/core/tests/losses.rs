mod common;

use proptest::prelude::*;

use skipgraph::losses::{bce, boundary_from_mask, total_loss, weight_map, weighted_bce, weighted_iou, SupervisionTargets};
use skipgraph::numerics::{grad_check, ops, GradCheckOptions, ParamStore, Probe, Tensor, Var};
use skipgraph::skipnet::DeepOutputs;
use skipgraph::Error;

fn mask_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (3usize..=20, 3usize..=20).prop_flat_map(|(h, w)| {
        (Just(h), Just(w), prop::collection::vec(prop::bool::weighted(0.4).prop_map(|b| b as u8 as f64), h * w))
    })
}

proptest! {
    #[test]
    fn targets_match_oracles((h, w, m) in mask_strategy()) {
        let t = Tensor::new(&[1, 1, h, w], m.clone()).unwrap();
        let edges = boundary_from_mask(&t).unwrap();
        let oracle = common::sobel_oracle(&m, h, w);
        prop_assert_eq!(edges.data(), oracle.as_slice());
        let omega = weight_map(&t).unwrap();
        for (a, o) in omega.data().iter().zip(common::weight_oracle(&m, h, w)) {
            prop_assert!((a - o).abs() < 1e-12);
            prop_assert!((1.0..=6.0).contains(a));
        }
    }

    #[test]
    fn losses_match_oracles(
        (h, w, m) in mask_strategy(),
        seed in any::<u64>(),
    ) {
        let n = h * w;
        let p: Vec<f64> = (0..n).map(|i| ((seed.wrapping_mul(i as u64 + 7) >> 11) % 1000) as f64 / 1000.0).collect();
        let t = Tensor::new(&[1, 1, h, w], m.clone()).unwrap();
        let omega = weight_map(&t).unwrap();
        let pv = Var::constant(Tensor::new(&[1, 1, h, w], p.clone()).unwrap());
        let wb = weighted_bce(&pv, &t, &omega).unwrap().value().item();
        let wi = weighted_iou(&pv, &t, &omega).unwrap().value().item();
        let plain = bce(&pv, &t).unwrap().value().item();
        prop_assert!((wb - common::weighted_bce_oracle(&p, &m, omega.data(), 1)).abs() < 1e-10);
        prop_assert!((wi - common::weighted_iou_oracle(&p, &m, omega.data(), 1)).abs() < 1e-10);
        prop_assert!((plain - common::weighted_bce_oracle(&p, &m, &vec![1.0; n], 1)).abs() < 1e-10);
    }
}

fn square(h: usize, w: usize, lo: usize, hi: usize) -> Tensor<f64> {
    Tensor::from_fn(&[1, 1, h, w], |i| ((lo..hi).contains(&(i / w)) && (lo..hi).contains(&(i % w))) as u8 as f64).unwrap()
}

#[test]
fn boundary_examples() {
    assert!(boundary_from_mask(&Tensor::<f64>::zeros(&[1, 1, 6, 6]).unwrap()).unwrap().data().iter().all(|&v| v == 0.0));
    assert!(boundary_from_mask(&Tensor::<f64>::full(&[1, 1, 6, 6], 1.0).unwrap()).unwrap().data().iter().all(|&v| v == 0.0));
    let b = boundary_from_mask(&square(8, 8, 3, 5)).unwrap();
    for y in 0..8 {
        for x in 0..8 {
            let ring = (2..6).contains(&y) && (2..6).contains(&x);
            assert_eq!(b.data()[y * 8 + x] == 1.0, ring, "({y}, {x})");
        }
    }
    let soft = Tensor::new(&[1, 1, 1, 2], vec![0.0, 0.5]).unwrap();
    assert!(matches!(boundary_from_mask(&soft), Err(Error::Validation(_))));
}

#[test]
fn weight_examples() {
    assert!(weight_map(&Tensor::<f64>::zeros(&[1, 1, 9, 9]).unwrap()).unwrap().data().iter().all(|&v| v == 1.0));
    // Left half foreground on a 64×64 grid: the pixel just left of the edge
    // sees 16 foreground columns out of 31.
    let half = Tensor::from_fn(&[1, 1, 64, 64], |i| ((i % 64) < 32) as u8 as f64).unwrap();
    let omega = weight_map(&half).unwrap();
    let want = 1.0 + 5.0 * (1.0 - 16.0 / 31.0);
    assert!((omega.data()[32 * 64 + 31] - want).abs() < 1e-12);
    assert!((omega.data()[32 * 64 + 31] - 3.4).abs() < 0.2);
}

#[test]
fn loss_examples() {
    let t = square(6, 6, 1, 4);
    let ones = Tensor::full(&[1, 1, 6, 6], 1.0).unwrap();
    let mid = Var::constant(Tensor::full(&[1, 1, 6, 6], 0.5).unwrap());
    assert!((weighted_bce(&mid, &t, &weight_map(&t).unwrap()).unwrap().value().item() - 2f64.ln()).abs() < 1e-15);

    let perfect = Var::constant(t.clone());
    assert!(weighted_bce(&perfect, &t, &ones).unwrap().value().item() <= -(1.0 - 1e-7f64).ln() + 1e-15);
    assert!(weighted_iou(&perfect, &t, &ones).unwrap().value().item().abs() < 1e-15);

    let all = Var::constant(ones.clone());
    let empty = Tensor::zeros(&[1, 1, 6, 6]).unwrap();
    let l = weighted_iou(&all, &empty, &ones).unwrap().value().item();
    assert!((l - (1.0 - 1.0 / 37.0)).abs() < 1e-15);
}

fn constant_outputs(region: &Tensor<f64>, boundary: &Tensor<f64>) -> DeepOutputs<f64> {
    DeepOutputs {
        region: std::array::from_fn(|_| Var::constant(region.clone())),
        boundary: std::array::from_fn(|_| Var::constant(boundary.clone())),
    }
}

#[test]
fn total_loss_examples() {
    let targets = SupervisionTargets::from_mask(square(32, 32, 8, 20)).unwrap();
    let (perfect, _) = total_loss(&constant_outputs(&targets.region, &targets.boundary), &targets).unwrap();
    assert!(perfect.value().item() <= 4.0 * 3e-6);

    let half = Tensor::full(&[1, 1, 32, 32], 0.5).unwrap();
    let (loss, parts) = total_loss(&constant_outputs(&half, &half), &targets).unwrap();
    let iou = common::weighted_iou_oracle(half.data(), targets.region.data(), targets.weight.data(), 1);
    let want = 4.0 * (iou + 2.0 * 2f64.ln());
    assert!((loss.value().item() - want).abs() < 1e-12);
    assert!((parts.total() - want).abs() < 1e-12);
    // One stage contributes exactly a quarter here.
    assert!((parts.iou - 4.0 * iou).abs() < 1e-12);
}

#[test]
fn loss_gradients_match_finite_differences() {
    let t = square(10, 10, 2, 7);
    let omega = weight_map(&t).unwrap();
    let mut store = ParamStore::<f64>::new();
    let id = store
        .register("logits", Tensor::from_fn(&[1, 1, 10, 10], |i| ((i * 13 % 11) as f64 - 5.0) / 3.0).unwrap())
        .unwrap();
    let opts = GradCheckOptions {
        probe: Probe::All,
        ..GradCheckOptions::default()
    };
    let report = grad_check(&mut store, &opts, |s| {
        let p = ops::sigmoid(&s.param(id))?;
        ops::add_all(&[weighted_bce(&p, &t, &omega)?, weighted_iou(&p, &t, &omega)?, bce(&p, &t)?])
    })
    .unwrap();
    assert!(report.max_rel_error() < 1e-6, "{:?}", report.worst_param());
}
