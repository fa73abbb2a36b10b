//! Adam with a per-epoch cosine-annealed learning rate.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::{ParamStore, Scalar, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    /// Floor reached by the cosine schedule on the last epoch.
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            lr_min: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// `lr_min + ½(lr − lr_min)(1 + cos(π·epoch/epochs))` for `epoch` in `0..epochs`.
pub fn cosine_lr(lr: f64, lr_min: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs <= 1 {
        return lr;
    }
    let t = epoch.min(epochs - 1) as f64 / (epochs - 1) as f64;
    lr_min + 0.5 * (lr - lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// First and second moment estimates, one pair per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<S> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig, store: &ParamStore<S>) -> Result<Self> {
        let zeros = || {
            store
                .params()
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            config,
            step: 0,
            m: zeros()?,
            v: zeros()?,
        })
    }

    /// One bias-corrected update. Parameters without a gradient are left alone
    /// (their moments still decay).
    pub fn update(&mut self, store: &mut ParamStore<S>, grads: &[Option<Tensor<S>>], lr: f64) -> Result<()> {
        if grads.len() != self.m.len() || store.params().len() != self.m.len() {
            return Err(Error::Manifest(format!(
                "optimizer tracks {} tensors, got {} gradients for {} parameters",
                self.m.len(),
                grads.len(),
                store.params().len()
            )));
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let step_size = S::lit(lr / bc1);
        let bc2_sqrt = S::lit(bc2.sqrt());
        let eps = S::lit(c.eps);
        for (i, p) in store.params_mut().iter_mut().enumerate() {
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            match &grads[i] {
                Some(g) => {
                    if g.shape() != p.value.shape() {
                        return Err(shape_err!("gradient {:?} for parameter {} {:?}", g.shape(), p.name, p.value.shape()));
                    }
                    let value = p.value.data_mut();
                    for j in 0..value.len() {
                        let gj = g.data()[j];
                        m[j] = b1 * m[j] + (S::one() - b1) * gj;
                        v[j] = b2 * v[j] + (S::one() - b2) * gj * gj;
                        value[j] -= step_size * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
                    }
                }
                None => {
                    m.iter_mut().for_each(|x| *x = b1 * *x);
                    v.iter_mut().for_each(|x| *x = b2 * *x);
                }
            }
        }
        Ok(())
    }
}
