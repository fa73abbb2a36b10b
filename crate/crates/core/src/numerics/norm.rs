use super::autograd::Var;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NormMode {
    #[default]
    Train,
    Eval,
}

/// Per-channel running mean and (unbiased) variance.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

/// Batch normalization over `[B, C, ...]`.
///
/// In train mode the batch statistics normalize the input and the updated
/// running statistics are returned alongside the output; eval mode reads
/// `running` and returns `None`.
pub fn batchnorm<S: Scalar>(
    input: &Var<S>,
    gamma: &Var<S>,
    beta: &Var<S>,
    running: &RunningStats<S>,
    mode: NormMode,
) -> Result<(Var<S>, Option<RunningStats<S>>)> {
    let shape = input.shape();
    if shape.len() < 2 {
        return Err(shape_err!("batchnorm: input rank {} < 2", shape.len()));
    }
    let (batch, chans) = (shape[0], shape[1]);
    let plane: usize = shape[2..].iter().product();
    for (name, t) in [("gamma", gamma), ("beta", beta)] {
        if t.value().len() != chans {
            return Err(shape_err!("batchnorm: {name} has {} entries, need {chans}", t.value().len()));
        }
    }
    if running.mean.len() != chans || running.var.len() != chans {
        return Err(shape_err!("batchnorm: running stats width mismatch"));
    }
    let count = batch * plane;
    let eps = S::lit(BN_EPS);
    let x = input.data();
    let idx = move |b: usize, c: usize| (b * chans + c) * plane;

    let (mean, var) = match mode {
        NormMode::Train => {
            if count < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "batch statistics over {count} element(s) per channel"
                )));
            }
            let n = S::lit(count as f64);
            let mut mean = vec![S::zero(); chans];
            let mut var = vec![S::zero(); chans];
            for c in 0..chans {
                let mut s = S::zero();
                for b in 0..batch {
                    s += x[idx(b, c)..idx(b, c) + plane].iter().copied().sum::<S>();
                }
                let m = s / n;
                let mut ss = S::zero();
                for b in 0..batch {
                    for &v in &x[idx(b, c)..idx(b, c) + plane] {
                        ss += (v - m) * (v - m);
                    }
                }
                mean[c] = m;
                var[c] = ss / n;
            }
            (mean, var)
        }
        NormMode::Eval => (running.mean.clone(), running.var.clone()),
    };

    let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![S::zero(); x.len()];
    let mut out = vec![S::zero(); x.len()];
    for b in 0..batch {
        for c in 0..chans {
            let (gm, bt) = (gamma.data()[c], beta.data()[c]);
            for i in idx(b, c)..idx(b, c) + plane {
                let h = (x[i] - mean[c]) * inv_std[c];
                xhat[i] = h;
                out[i] = gm * h + bt;
            }
        }
    }
    let out = Tensor::new(shape, out)?;

    let updated = (mode == NormMode::Train).then(|| {
        let mom = S::lit(BN_MOMENTUM);
        let unbias = S::lit(count as f64 / (count - 1) as f64);
        RunningStats {
            mean: running
                .mean
                .iter()
                .zip(&mean)
                .map(|(&r, &m)| (S::one() - mom) * r + mom * m)
                .collect(),
            var: running
                .var
                .iter()
                .zip(&var)
                .map(|(&r, &v)| (S::one() - mom) * r + mom * v * unbias)
                .collect(),
        }
    });

    let gc = gamma.clone();
    let var = Var::from_op("batchnorm", out, &[input, gamma, beta], move |g, needs| {
        let mut dgamma = vec![S::zero(); chans];
        let mut dbeta = vec![S::zero(); chans];
        for b in 0..batch {
            for c in 0..chans {
                for i in idx(b, c)..idx(b, c) + plane {
                    dgamma[c] += g[i] * xhat[i];
                    dbeta[c] += g[i];
                }
            }
        }
        let gx = needs[0].then(|| {
            let mut gx = vec![S::zero(); g.len()];
            match mode {
                NormMode::Train => {
                    let n = S::lit(count as f64);
                    for c in 0..chans {
                        // dL/dxhat = g * gamma; sums reuse dbeta/dgamma.
                        let gm = gc.data()[c];
                        let sum_dxhat = dbeta[c] * gm;
                        let sum_dxhat_xhat = dgamma[c] * gm;
                        for b in 0..batch {
                            for i in idx(b, c)..idx(b, c) + plane {
                                gx[i] = inv_std[c] / n
                                    * (n * g[i] * gm - sum_dxhat - xhat[i] * sum_dxhat_xhat);
                            }
                        }
                    }
                }
                NormMode::Eval => {
                    for b in 0..batch {
                        for c in 0..chans {
                            let k = gc.data()[c] * inv_std[c];
                            for i in idx(b, c)..idx(b, c) + plane {
                                gx[i] = g[i] * k;
                            }
                        }
                    }
                }
            }
            gx
        });
        vec![gx, needs[1].then_some(dgamma), needs[2].then_some(dbeta)]
    })?;
    Ok((var, updated))
}
