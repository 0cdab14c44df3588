//! The tensor type and the reverse-mode machinery.

use crate::{Result, Scalar};
use rand::Rng;
use rand_distr::StandardNormal;
use std::cell::{Cell, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: dimension mismatch: {msg}")]
    Dim { op: &'static str, msg: String },
    #[error("{op}: invalid configuration: {msg}")]
    Config { op: &'static str, msg: String },
    #[error("{op}: contract violation: {msg}")]
    Contract { op: &'static str, msg: String },
    #[error("{op}: non-finite value: {msg}")]
    NonFinite { op: &'static str, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("l4dt: {0}")]
    Format(String),
}

pub(crate) fn dim_err<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(TensorError::Dim { op, msg: msg.into() })
}

pub(crate) fn config_err<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(TensorError::Config { op, msg: msg.into() })
}

pub(crate) fn contract_err<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(TensorError::Contract { op, msg: msg.into() })
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Gradient contribution for each parent, `None` when a parent is untracked.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>>>;

pub(crate) struct Node<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: Rc<RefCell<Vec<T>>>,
    requires_grad: bool,
    tracked: bool,
    grad: RefCell<Option<Vec<T>>>,
    parents: Vec<Tensor<T>>,
    backward_fn: Option<BackwardFn<T>>,
    backward_done: Cell<bool>,
}

/// A dense row-major tensor; also a node in the autodiff graph.
///
/// Cloning is cheap (shared node). `Rc` keeps graphs on a single thread.
pub struct Tensor<T: Scalar> {
    node: Rc<Node<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor { node: Rc::clone(&self.node) }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}(id={})", self.node.shape, self.node.id)
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    // ── construction ───────────────────────────────────────────────

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return dim_err(
                "from_vec",
                format!("shape {:?} needs {} scalars, got {}", shape, numel(shape), data.len()),
            );
        }
        Ok(Self::leaf(shape.to_vec(), data, false))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::leaf(shape.to_vec(), vec![T::zero(); numel(shape)], false)
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::leaf(shape.to_vec(), vec![value; numel(shape)], false)
    }

    pub fn scalar(value: T) -> Self {
        Self::leaf(vec![], vec![value], false)
    }

    /// Standard normal samples, drawn in row-major order.
    pub fn randn(shape: &[usize], rng: &mut impl Rng) -> Self {
        let data = (0..numel(shape))
            .map(|_| T::from_f64(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Self::leaf(shape.to_vec(), data, false)
    }

    /// Mark as a trainable leaf. Returns a new handle to the same storage.
    pub fn trainable(&self) -> Self {
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape: self.node.shape.clone(),
                data: Rc::clone(&self.node.data),
                requires_grad: true,
                tracked: true,
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward_fn: None,
                backward_done: Cell::new(false),
            }),
        }
    }

    /// A leaf that shares storage but is cut off from the graph.
    pub fn detach(&self) -> Self {
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape: self.node.shape.clone(),
                data: Rc::clone(&self.node.data),
                requires_grad: false,
                tracked: false,
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward_fn: None,
                backward_done: Cell::new(false),
            }),
        }
    }

    pub(crate) fn leaf(shape: Vec<usize>, data: Vec<T>, requires_grad: bool) -> Self {
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: Rc::new(RefCell::new(data)),
                requires_grad,
                tracked: requires_grad,
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward_fn: None,
                backward_done: Cell::new(false),
            }),
        }
    }

    /// Graph node constructor used by every operation. When no parent is
    /// tracked the closure and edges are dropped so inference builds no graph.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        parents: Vec<Tensor<T>>,
        backward_fn: BackwardFn<T>,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        let tracked = parents.iter().any(|p| p.node.tracked);
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: Rc::new(RefCell::new(data)),
                requires_grad: false,
                tracked,
                grad: RefCell::new(None),
                parents: if tracked { parents } else { Vec::new() },
                backward_fn: if tracked { Some(backward_fn) } else { None },
                backward_done: Cell::new(false),
            }),
        }
    }

    /// Like [`Tensor::from_op`] but with caller-wrapped storage, so backward
    /// closures can hold the output buffer without copying it.
    pub(crate) fn from_op_shared(
        shape: Vec<usize>,
        data: Rc<RefCell<Vec<T>>>,
        parents: Vec<Tensor<T>>,
        backward_fn: BackwardFn<T>,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.borrow().len());
        let tracked = parents.iter().any(|p| p.node.tracked);
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                requires_grad: false,
                tracked,
                grad: RefCell::new(None),
                parents: if tracked { parents } else { Vec::new() },
                backward_fn: if tracked { Some(backward_fn) } else { None },
                backward_done: Cell::new(false),
            }),
        }
    }

    /// Shared handle to the raw storage, for zero-copy closure captures.
    pub(crate) fn data_rc(&self) -> Rc<RefCell<Vec<T>>> {
        Rc::clone(&self.node.data)
    }

    /// Node that reuses the parent's storage (reshape and friends).
    pub(crate) fn view_op(
        shape: Vec<usize>,
        parent: Tensor<T>,
        backward_fn: BackwardFn<T>,
    ) -> Self {
        debug_assert_eq!(numel(&shape), parent.len());
        let tracked = parent.node.tracked;
        let data = Rc::clone(&parent.node.data);
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                requires_grad: false,
                tracked,
                grad: RefCell::new(None),
                parents: if tracked { vec![parent] } else { Vec::new() },
                backward_fn: if tracked { Some(backward_fn) } else { None },
                backward_done: Cell::new(false),
            }),
        }
    }

    // ── accessors ──────────────────────────────────────────────────

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn len(&self) -> usize {
        numel(&self.node.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.node.data.borrow().clone()
    }

    pub fn item(&self) -> Result<T> {
        if self.len() != 1 {
            return contract_err("item", format!("tensor has {} elements", self.len()));
        }
        Ok(self.node.data.borrow()[0])
    }

    /// Run `f` over the raw storage without copying.
    pub fn with_data<R>(&self, f: impl FnOnce(&[T]) -> R) -> R {
        f(&self.node.data.borrow())
    }

    /// In-place mutation; reserved for optimizer updates and loaders.
    pub fn with_data_mut<R>(&self, f: impl FnOnce(&mut [T]) -> R) -> R {
        f(&mut self.node.data.borrow_mut())
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.node.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    /// Explicit finiteness check (NaN/Inf are otherwise allowed to flow).
    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        let data = self.node.data.borrow();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite {
                op,
                msg: format!("element {} of shape {:?} is {}", i, self.node.shape, data[i]),
            });
        }
        Ok(())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.node.data.borrow().iter().map(|v| v.as_f64()).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        let data = self.node.data.borrow().iter().map(|v| U::from_f64(v.as_f64())).collect();
        Tensor::leaf(self.node.shape.clone(), data, false)
    }

    // ── backward ───────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. Gradients are accumulated into
    /// every tracked node and kept on `requires_grad` leaves. Running twice
    /// on the same node is an error; rebuild the graph instead.
    pub fn backward(&self) -> Result<()> {
        if self.len() != 1 {
            return contract_err(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.node.shape),
            );
        }
        if !self.node.tracked {
            return contract_err("backward", "no gradient tape recorded for this value");
        }
        if self.node.backward_done.get() {
            return contract_err("backward", "backward already ran on this graph");
        }
        self.node.backward_done.set(true);

        // Post-order DFS over tracked nodes, iterative to bound stack depth.
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        seen.insert(self.node.id);
        while let Some((node, child_idx)) = stack.pop() {
            let parents = &node.node.parents;
            if child_idx < parents.len() {
                let next = parents[child_idx].clone();
                stack.push((node, child_idx + 1));
                if next.node.tracked && seen.insert(next.node.id) {
                    stack.push((next, 0));
                }
            } else {
                order.push(node);
            }
        }

        *self.node.grad.borrow_mut() = Some(vec![T::one()]);

        for node in order.iter().rev() {
            let Some(backward_fn) = node.node.backward_fn.as_ref() else {
                continue;
            };
            let grad = if node.node.requires_grad {
                node.node.grad.borrow().clone()
            } else {
                node.node.grad.borrow_mut().take()
            };
            let Some(grad) = grad else {
                continue; // no downstream path contributed
            };
            let contributions = backward_fn(&grad);
            debug_assert_eq!(contributions.len(), node.node.parents.len());
            for (parent, contribution) in node.node.parents.iter().zip(contributions) {
                if !parent.node.tracked {
                    continue;
                }
                let Some(contribution) = contribution else {
                    continue;
                };
                debug_assert_eq!(contribution.len(), parent.len());
                let mut slot = parent.node.grad.borrow_mut();
                match slot.as_mut() {
                    Some(acc) => {
                        for (a, c) in acc.iter_mut().zip(&contribution) {
                            *a += *c;
                        }
                    }
                    None => *slot = Some(contribution),
                }
            }
        }
        Ok(())
    }
}
