//! Reverse-mode differentiation over a dynamically built expression graph.

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Backward rule of one op: receives the output gradient and a per-parent
/// "needs gradient" mask, returns one optional gradient buffer per parent.
pub(crate) type BackwardFn<S> = Box<dyn Fn(&[S], &[bool]) -> Vec<Option<Vec<S>>>>;

struct Node<S: Scalar> {
    value: Tensor<S>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<S>>>,
    parents: Vec<Var<S>>,
    backward: Option<BackwardFn<S>>,
}

/// A tensor value participating in the expression graph.
///
/// Cloning is cheap (reference counted). Leaves created with
/// [`Var::leaf`] accumulate gradients; constants never do.
pub struct Var<S: Scalar>(Rc<Node<S>>);

impl<S: Scalar> Clone for Var<S> {
    fn clone(&self) -> Self {
        Var(Rc::clone(&self.0))
    }
}

impl<S: Scalar> fmt::Debug for Var<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("shape", &self.0.value.shape())
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

impl<S: Scalar> Var<S> {
    pub fn constant(value: Tensor<S>) -> Self {
        Self::make(value, false, Vec::new(), None)
    }

    pub fn leaf(value: Tensor<S>) -> Self {
        Self::make(value, true, Vec::new(), None)
    }

    fn make(
        value: Tensor<S>,
        requires_grad: bool,
        parents: Vec<Var<S>>,
        backward: Option<BackwardFn<S>>,
    ) -> Self {
        Var(Rc::new(Node {
            value,
            requires_grad,
            grad: RefCell::new(None),
            parents,
            backward,
        }))
    }

    /// Records the result of an op. Fails when the forward value contains
    /// NaN or infinity.
    pub(crate) fn from_op(
        name: &str,
        value: Tensor<S>,
        parents: &[&Var<S>],
        backward: impl Fn(&[S], &[bool]) -> Vec<Option<Vec<S>>> + 'static,
    ) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("{name} produced a non-finite value")));
        }
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        if !requires_grad {
            return Ok(Self::constant(value));
        }
        Ok(Self::make(
            value,
            true,
            parents.iter().map(|&p| p.clone()).collect(),
            Some(Box::new(backward)),
        ))
    }

    pub fn value(&self) -> &Tensor<S> {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn data(&self) -> &[S] {
        self.0.value.data()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Accumulated gradient, if backward reached this node.
    pub fn grad(&self) -> Option<Tensor<S>> {
        self.0
            .grad
            .borrow()
            .as_ref()
            .map(|g| Tensor::new(self.shape(), g.clone()).expect("gradient shape"))
    }

    pub fn same_node(&self, other: &Var<S>) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    fn accumulate(&self, g: Vec<S>) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, v)| *a += v),
            None => *slot = Some(g),
        }
    }

    /// Back-propagates from this node, seeding its gradient with ones.
    ///
    /// Gradients of intermediate nodes are released as soon as they have
    /// been pushed to their parents; leaves keep theirs.
    pub fn backward(&self) {
        let order = self.topo_order();
        self.accumulate(vec![S::one(); self.0.value.len()]);
        for node in order.iter().rev() {
            let Some(backward) = node.0.backward.as_ref() else {
                continue;
            };
            let Some(g) = node.0.grad.borrow_mut().take() else {
                continue;
            };
            let needs: Vec<bool> = node.0.parents.iter().map(|p| p.requires_grad()).collect();
            let grads = backward(&g, &needs);
            debug_assert_eq!(grads.len(), node.0.parents.len());
            for ((parent, pg), need) in node.0.parents.iter().zip(grads).zip(needs) {
                if let (Some(pg), true) = (pg, need) {
                    debug_assert_eq!(pg.len(), parent.value().len());
                    parent.accumulate(pg);
                }
            }
        }
    }

    fn topo_order(&self) -> Vec<Var<S>> {
        let mut order = Vec::new();
        let mut seen: HashSet<*const Node<S>> = HashSet::new();
        let mut stack: Vec<(Var<S>, bool)> = vec![(self.clone(), false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                order.push(v);
                continue;
            }
            if !seen.insert(Rc::as_ptr(&v.0)) {
                continue;
            }
            stack.push((v.clone(), true));
            for p in &v.0.parents {
                if p.requires_grad() && !seen.contains(&Rc::as_ptr(&p.0)) {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }
}
