//! Named parameter storage and the per-forward-pass [`Session`].

use std::cell::RefCell;
use std::collections::HashMap;

use rand::Rng;

use super::autograd::Var;
use super::norm::{batchnorm, NormMode, RunningStats};
use super::ops;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BufferId(usize);

/// A learnable tensor and its unique name.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
}

/// Owns every learnable parameter and non-learnable buffer (batch-norm
/// running statistics) of a model. Names are unique across both lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<S> {
    params: Vec<Parameter<S>>,
    buffers: Vec<Parameter<S>>,
    names: HashMap<String, Slot>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    Param(usize),
    Buffer(usize),
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            buffers: Vec::new(),
            names: HashMap::new(),
        }
    }

    fn claim(&mut self, name: &str, slot: Slot) -> Result<()> {
        if self.names.contains_key(name) {
            return Err(Error::Config(format!("parameter '{name}' registered twice")));
        }
        self.names.insert(name.to_string(), slot);
        Ok(())
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor<S>) -> Result<ParamId> {
        let name = name.into();
        let id = self.params.len();
        self.claim(&name, Slot::Param(id))?;
        self.params.push(Parameter { name, value });
        Ok(ParamId(id))
    }

    pub fn register_buffer(&mut self, name: impl Into<String>, value: Tensor<S>) -> Result<BufferId> {
        let name = name.into();
        let id = self.buffers.len();
        self.claim(&name, Slot::Buffer(id))?;
        self.buffers.push(Parameter { name, value });
        Ok(BufferId(id))
    }

    pub fn params(&self) -> &[Parameter<S>] {
        &self.params
    }

    pub fn buffers(&self) -> &[Parameter<S>] {
        &self.buffers
    }

    pub fn param(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id.0]
    }

    pub fn params_mut(&mut self) -> &mut [Parameter<S>] {
        &mut self.params
    }

    pub fn buffers_mut(&mut self) -> &mut [Parameter<S>] {
        &mut self.buffers
    }

    pub fn buffer(&self, id: BufferId) -> &Tensor<S> {
        &self.buffers[id.0].value
    }

    pub fn find_param(&self, name: &str) -> Option<ParamId> {
        match self.names.get(name) {
            Some(Slot::Param(i)) => Some(ParamId(*i)),
            _ => None,
        }
    }

    /// Total number of learnable scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn apply_stat_updates(&mut self, updates: Vec<(BatchNormIds, RunningStats<S>)>) -> Result<()> {
        for (ids, stats) in updates {
            let c = stats.mean.len();
            self.buffers[ids.running_mean.0].value = Tensor::new(&[c], stats.mean)?;
            self.buffers[ids.running_var.0].value = Tensor::new(&[c], stats.var)?;
        }
        Ok(())
    }

    /// Converts every parameter and buffer to another precision.
    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        let conv = |p: &Parameter<S>| Parameter {
            name: p.name.clone(),
            value: p.value.cast(),
        };
        ParamStore {
            params: self.params.iter().map(conv).collect(),
            buffers: self.buffers.iter().map(conv).collect(),
            names: self.names.clone(),
        }
    }
}

/// Handles of one batch-norm layer inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchNormIds {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
}

impl BatchNormIds {
    /// gamma = 1, beta = 0, running mean 0, running variance 1.
    pub fn register<S: Scalar>(store: &mut ParamStore<S>, prefix: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.register(format!("{prefix}.gamma"), Tensor::full(&[channels], S::one())?)?,
            beta: store.register(format!("{prefix}.beta"), Tensor::zeros(&[channels])?)?,
            running_mean: store.register_buffer(format!("{prefix}.running_mean"), Tensor::zeros(&[channels])?)?,
            running_var: store
                .register_buffer(format!("{prefix}.running_var"), Tensor::full(&[channels], S::one())?)?,
        })
    }
}

/// He/Kaiming uniform initialisation: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
pub fn kaiming_uniform<S: Scalar, R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Result<Tensor<S>> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| S::lit(rng.random_range(-bound..bound)))
}

/// Non-differentiable index decisions (graph neighbours, channel
/// selections) made during a forward pass. Recording them and replaying
/// them freezes the topology, e.g. while probing finite differences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IndexTape {
    pub entries: Vec<Vec<usize>>,
}

enum TapeMode {
    Live,
    Record(IndexTape),
    Replay { tape: IndexTape, cursor: usize },
}

/// State of a single forward (and optional backward) pass.
///
/// Parameters become graph leaves the first time they are requested, so a
/// parameter used in several places still owns exactly one gradient.
pub struct Session<'a, S: Scalar> {
    store: &'a ParamStore<S>,
    mode: NormMode,
    track_grad: bool,
    leaves: RefCell<Vec<Option<Var<S>>>>,
    stat_updates: RefCell<Vec<(BatchNormIds, RunningStats<S>)>>,
    tape: RefCell<TapeMode>,
}

impl<'a, S: Scalar> Session<'a, S> {
    /// Training pass: batch statistics, gradients tracked.
    pub fn train(store: &'a ParamStore<S>) -> Self {
        Self::new(store, NormMode::Train, true)
    }

    /// Inference pass: running statistics, no gradients.
    pub fn eval(store: &'a ParamStore<S>) -> Self {
        Self::new(store, NormMode::Eval, false)
    }

    pub fn new(store: &'a ParamStore<S>, mode: NormMode, track_grad: bool) -> Self {
        Self {
            store,
            mode,
            track_grad,
            leaves: RefCell::new(vec![None; store.params.len()]),
            stat_updates: RefCell::new(Vec::new()),
            tape: RefCell::new(TapeMode::Live),
        }
    }

    pub fn recording(self) -> Self {
        *self.tape.borrow_mut() = TapeMode::Record(IndexTape::default());
        self
    }

    pub fn replaying(self, tape: IndexTape) -> Self {
        *self.tape.borrow_mut() = TapeMode::Replay { tape, cursor: 0 };
        self
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }

    pub fn store(&self) -> &ParamStore<S> {
        self.store
    }

    pub fn param(&self, id: ParamId) -> Var<S> {
        let mut leaves = self.leaves.borrow_mut();
        leaves[id.0]
            .get_or_insert_with(|| {
                let value = self.store.params[id.0].value.clone();
                if self.track_grad {
                    Var::leaf(value)
                } else {
                    Var::constant(value)
                }
            })
            .clone()
    }

    pub fn batchnorm(&self, x: &Var<S>, ids: &BatchNormIds) -> Result<Var<S>> {
        let running = RunningStats {
            mean: self.store.buffer(ids.running_mean).data().to_vec(),
            var: self.store.buffer(ids.running_var).data().to_vec(),
        };
        let (y, updated) = batchnorm(x, &self.param(ids.gamma), &self.param(ids.beta), &running, self.mode)?;
        if let Some(stats) = updated {
            self.stat_updates.borrow_mut().push((*ids, stats));
        }
        Ok(y)
    }

    /// Resolves one index decision: computed live (and recorded when
    /// recording) or taken from the replay tape.
    pub fn frozen_indices(&self, compute: impl FnOnce() -> Result<Vec<usize>>) -> Result<Vec<usize>> {
        let mut tape = self.tape.borrow_mut();
        match &mut *tape {
            TapeMode::Live => compute(),
            TapeMode::Record(t) => {
                let ix = compute()?;
                t.entries.push(ix.clone());
                Ok(ix)
            }
            TapeMode::Replay { tape, cursor } => {
                let ix = tape
                    .entries
                    .get(*cursor)
                    .cloned()
                    .ok_or_else(|| Error::Graph("replay tape exhausted".into()))?;
                *cursor += 1;
                Ok(ix)
            }
        }
    }

    /// Whether index decisions are recorded or replayed.
    pub fn is_taped(&self) -> bool {
        !matches!(*self.tape.borrow(), TapeMode::Live)
    }

    /// ReLU whose on/off pattern is a tape decision, so replays stay on the
    /// linear piece of the recording pass.
    pub fn relu(&self, x: &Var<S>) -> Result<Var<S>> {
        if !self.is_taped() {
            return ops::relu(x);
        }
        let pass = self.frozen_indices(|| Ok(x.data().iter().map(|&v| (v > S::zero()) as usize).collect()))?;
        ops::relu_pattern(x, &pass)
    }

    /// Gradients of every parameter after `backward`, indexed by [`ParamId`].
    pub fn gradients(&self) -> Vec<Option<Tensor<S>>> {
        self.leaves
            .borrow()
            .iter()
            .map(|leaf| leaf.as_ref().and_then(|v| v.grad()))
            .collect()
    }

    pub fn take_stat_updates(&self) -> Vec<(BatchNormIds, RunningStats<S>)> {
        std::mem::take(&mut *self.stat_updates.borrow_mut())
    }

    pub fn take_tape(&self) -> IndexTape {
        match std::mem::replace(&mut *self.tape.borrow_mut(), TapeMode::Live) {
            TapeMode::Record(t) => t,
            TapeMode::Replay { tape, .. } => tape,
            TapeMode::Live => IndexTape::default(),
        }
    }
}
