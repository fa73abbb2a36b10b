//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::autograd::Var;
use super::params::{IndexTape, ParamStore, Session};
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Which scalar entries of each parameter are probed individually.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Probe {
    /// Every entry of every parameter.
    All,
    /// Up to `n` distinct entries per parameter, drawn at random.
    Sampled(usize),
    /// No per-entry probes (directional checks only).
    None,
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions<S> {
    pub eps: S,
    pub probe: Probe,
    /// Also compare the derivative along a random unit-norm direction with
    /// equal-magnitude ± entries spanning the whole parameter tensor.
    pub directional: bool,
    /// Combine central differences at `eps` and `eps/2` as
    /// `(4·D(eps/2) − D(eps)) / 3`, cancelling the `eps²` truncation term.
    pub richardson: bool,
    pub seed: u64,
}

impl<S: Scalar> Default for GradCheckOptions<S> {
    fn default() -> Self {
        Self {
            eps: S::default_fd_step(),
            probe: Probe::All,
            directional: false,
            richardson: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub probes: usize,
    /// Largest relative error over the probed entries (0 when none probed).
    pub max_rel_error: f64,
    pub directional_rel_error: Option<f64>,
}

impl ParamCheck {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.max(self.directional_rel_error.unwrap_or(0.0))
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(ParamCheck::worst).fold(0.0, f64::max)
    }

    pub fn worst_param(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.worst().total_cmp(&b.worst()))
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε`.
///
/// The first evaluation records every index decision (graph neighbours,
/// channel selections) and all probes replay them, so the checked function
/// is smooth in the parameters. Parameter values are restored afterwards.
pub fn grad_check<S, F>(
    store: &mut ParamStore<S>,
    opts: &GradCheckOptions<S>,
    mut f: F,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: FnMut(&Session<S>) -> Result<Var<S>>,
{
    let (grads, tape) = analytic(store, &mut f)?;
    probe(store, &grads, tape, opts, f)
}

/// Like [`grad_check`], but the finite differences are taken in `f64` on a
/// widened copy of the parameters (`reference` must compute the same
/// function). Checks low-precision backward passes without the rounding
/// noise of low-precision differencing.
pub fn grad_check_reference<S, F, G>(
    store: &ParamStore<S>,
    opts: &GradCheckOptions<f64>,
    mut f: F,
    reference: G,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: FnMut(&Session<S>) -> Result<Var<S>>,
    G: FnMut(&Session<f64>) -> Result<Var<f64>>,
{
    let (grads, tape) = analytic(store, &mut f)?;
    probe(&mut store.cast::<f64>(), &grads, tape, opts, reference)
}

fn analytic<S, F>(store: &ParamStore<S>, f: &mut F) -> Result<(Vec<Vec<f64>>, IndexTape)>
where
    S: Scalar,
    F: FnMut(&Session<S>) -> Result<Var<S>>,
{
    let session = Session::train(store).recording();
    let loss = f(&session)?;
    if loss.value().len() != 1 {
        return Err(Error::Shape(format!(
            "grad_check needs a scalar output, got shape {:?}",
            loss.shape()
        )));
    }
    loss.backward();
    let grads = session
        .gradients()
        .into_iter()
        .zip(store.params())
        .map(|(g, p)| match g {
            Some(g) => g.data().iter().map(|v| v.as_f64()).collect(),
            None => vec![0.0; p.value.len()],
        })
        .collect();
    Ok((grads, session.take_tape()))
}

fn probe<T, F>(
    store: &mut ParamStore<T>,
    grads: &[Vec<f64>],
    tape: IndexTape,
    opts: &GradCheckOptions<T>,
    mut f: F,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: FnMut(&Session<T>) -> Result<Var<T>>,
{
    let mut eval = |store: &ParamStore<T>| -> Result<f64> {
        let session = Session::train(store).replaying(tape.clone());
        let v = f(&session)?.value().item().as_f64();
        if !v.is_finite() {
            return Err(Error::Numeric("non-finite value while probing".into()));
        }
        Ok(v)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let eps = opts.eps.as_f64();
    // Central difference of `f` along `dir` (restricted to `entries`) in parameter `pi`.
    let mut derivative = |store: &mut ParamStore<T>, pi: usize, entries: &[usize], dir: &[T]| -> Result<f64> {
        let orig = store.params()[pi].value.clone();
        let mut central = |h: f64| -> Result<f64> {
            let mut at = |sign: f64| -> Result<f64> {
                let mut t = orig.clone();
                for (&i, &d) in entries.iter().zip(dir) {
                    t.data_mut()[i] += T::lit(sign * h) * d;
                }
                store.params_mut()[pi].value = t;
                eval(store)
            };
            let (plus, minus) = (at(1.0), at(-1.0));
            Ok((plus? - minus?) / (2.0 * h))
        };
        let d = if opts.richardson {
            let coarse = central(eps);
            let fine = central(eps / 2.0);
            (4.0 * fine? - coarse?) / 3.0
        } else {
            central(eps)?
        };
        store.params_mut()[pi].value = orig;
        Ok(d)
    };

    let mut report = GradCheckReport::default();
    for (pi, analytic) in grads.iter().enumerate() {
        let n = analytic.len();
        let entries: Vec<usize> = match opts.probe {
            Probe::All => (0..n).collect(),
            Probe::Sampled(k) => {
                let mut v = sample(&mut rng, n, k.min(n)).into_vec();
                v.sort_unstable();
                v
            }
            Probe::None => Vec::new(),
        };
        let mut max_rel: f64 = 0.0;
        for &i in &entries {
            let numeric = derivative(store, pi, &[i], &[T::one()])?;
            max_rel = max_rel.max(relative_error(analytic[i], numeric));
        }
        let directional = if opts.directional {
            let unit = T::lit(1.0 / (n as f64).sqrt());
            let dir: Vec<T> = (0..n)
                .map(|_| if rng.random::<bool>() { unit } else { -unit })
                .collect();
            let all: Vec<usize> = (0..n).collect();
            let numeric = derivative(store, pi, &all, &dir)?;
            let a: f64 = analytic.iter().zip(&dir).map(|(g, d)| g * d.as_f64()).sum();
            Some(relative_error(a, numeric))
        } else {
            None
        };
        report.params.push(ParamCheck {
            name: store.params()[pi].name.clone(),
            probes: entries.len(),
            max_rel_error: max_rel,
            directional_rel_error: directional,
        });
    }
    Ok(report)
}
