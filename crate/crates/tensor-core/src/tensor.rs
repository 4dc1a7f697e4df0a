//! The dense tensor type and its autodiff bookkeeping.
//!
//! A [`Tensor`] is a cheaply clonable handle (`Rc`) to an immutable row-major
//! `f64` buffer plus the links an operation recorded when it produced the
//! value. Leaves created with [`Tensor::param`] accumulate gradients during
//! [`crate::backward`]; everything else is an interior node of the recorded
//! graph and is freed once the handles to it are dropped.

use std::cell::{Cell, Ref, RefCell};
use std::rc::Rc;

use crate::error::{Result, TensorError};

/// Accumulates the upstream gradient of a node into its operands.
///
/// Captures whatever forward context it needs (operand handles, argmax
/// indices, batch statistics) by value.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64])>;

pub(crate) struct Inner {
    shape: Vec<usize>,
    /// Mutated only for leaves, through `set_data`/`update_data`.
    data: RefCell<Vec<f64>>,
    requires_grad: bool,
    is_leaf: bool,
    grad: RefCell<Option<Vec<f64>>>,
    /// Operand tensors, in operation order. Empty for leaves and constants.
    parents: Vec<Tensor>,
    backward_fn: Option<BackwardFn>,
    /// Set once a backward pass has consumed this node as its root.
    consumed: Cell<bool>,
}

/// Dense n-dimensional array of `f64` in row-major order, with optional
/// gradient tracking.
#[derive(Clone)]
pub struct Tensor {
    pub(crate) inner: Rc<Inner>,
}

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` with gradient recording disabled on this thread.
///
/// Operations executed inside produce constant tensors: no operands are
/// retained and no backward functions are recorded.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let out = f();
    GRAD_ENABLED.with(|g| g.set(prev));
    out
}

pub(crate) fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    let numel: usize = shape.iter().product();
    if numel != len {
        return Err(TensorError::ShapeMismatch(format!(
            "shape {:?} implies {} elements, data has {}",
            shape, numel, len
        )));
    }
    Ok(())
}

impl Tensor {
    /// Constant tensor; never tracked by autodiff.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, data.len())?;
        Ok(Self::leaf(shape.to_vec(), data, false))
    }

    /// Leaf parameter: accumulates a gradient during backward passes.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, data.len())?;
        Ok(Self::leaf(shape.to_vec(), data, true))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel = shape.iter().product();
        Self::leaf(shape.to_vec(), vec![0.0; numel], false)
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        let numel = shape.iter().product();
        Self::leaf(shape.to_vec(), vec![value; numel], false)
    }

    pub fn scalar(value: f64) -> Tensor {
        Self::leaf(vec![1], vec![value], false)
    }

    fn leaf(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Tensor {
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data: RefCell::new(data),
                requires_grad,
                is_leaf: true,
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward_fn: None,
                consumed: Cell::new(false),
            }),
        }
    }

    /// Result of an operation. Tracking is dropped entirely when no operand
    /// requires a gradient (or recording is disabled), so inference builds
    /// no graph.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward_fn: BackwardFn,
    ) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let tracked = grad_enabled() && parents.iter().any(|p| p.requires_grad());
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data: RefCell::new(data),
                requires_grad: tracked,
                is_leaf: false,
                grad: RefCell::new(None),
                parents: if tracked { parents } else { Vec::new() },
                backward_fn: if tracked { Some(backward_fn) } else { None },
                consumed: Cell::new(false),
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.is_leaf
    }

    /// Borrow of the underlying row-major buffer.
    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalar(self.shape().to_vec()));
        }
        Ok(self.inner.data.borrow()[0])
    }

    /// Interpret as `[B, C, H, W]`.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.inner.shape[..] {
            [b, c, h, w] => Ok((b, c, h, w)),
            _ => Err(TensorError::ShapeMismatch(format!(
                "expected rank-4 tensor, got shape {:?}",
                self.shape()
            ))),
        }
    }

    /// Replaces the values of a leaf tensor (optimizer updates).
    pub fn set_data(&self, data: Vec<f64>) -> Result<()> {
        if !self.is_leaf() {
            return Err(TensorError::NotALeaf);
        }
        if data.len() != self.numel() {
            return Err(TensorError::ShapeMismatch(format!(
                "set_data: expected {} elements, got {}",
                self.numel(),
                data.len()
            )));
        }
        *self.inner.data.borrow_mut() = data;
        Ok(())
    }

    /// In-place mutation of a leaf tensor's values.
    pub fn update_data(&self, f: impl FnOnce(&mut [f64])) -> Result<()> {
        if !self.is_leaf() {
            return Err(TensorError::NotALeaf);
        }
        f(&mut self.inner.data.borrow_mut());
        Ok(())
    }

    /// The accumulated gradient, if a backward pass has produced one.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn clear_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Adds `delta` into this node's gradient buffer. No-op for untracked
    /// tensors.
    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        if !self.requires_grad() {
            return;
        }
        debug_assert_eq!(delta.len(), self.numel());
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => {
                for (g, d) in buf.iter_mut().zip(delta) {
                    *g += d;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    pub(crate) fn parents(&self) -> &[Tensor] {
        &self.inner.parents
    }

    pub(crate) fn backward_fn(&self) -> Option<&BackwardFn> {
        self.inner.backward_fn.as_ref()
    }

    pub(crate) fn mark_consumed(&self) {
        self.inner.consumed.set(true);
    }

    pub(crate) fn is_consumed(&self) -> bool {
        self.inner.consumed.get()
    }

    /// Stable identity of the underlying node, used for graph traversal.
    pub(crate) fn node_id(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    /// A constant copy sharing no graph history.
    pub fn detach(&self) -> Tensor {
        Self::leaf(self.inner.shape.clone(), self.to_vec(), false)
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={}, leaf={})",
            self.shape(),
            self.requires_grad(),
            self.is_leaf()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_shape() {
        let err = Tensor::from_vec(&[2, 3], vec![1.0; 5]).unwrap_err();
        assert!(matches!(err, TensorError::ShapeMismatch(_)));
    }

    #[test]
    fn invariant_numel_matches_data() {
        let t = Tensor::from_vec(&[2, 3, 4], vec![0.5; 24]).unwrap();
        assert_eq!(t.numel(), t.data().len());
        assert_eq!(t.shape(), &[2, 3, 4]);
    }

    #[test]
    fn set_data_only_on_leaves() {
        let t = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        t.set_data(vec![3.0, 4.0]).unwrap();
        assert_eq!(t.to_vec(), vec![3.0, 4.0]);

        let y = crate::ops::relu(&t).unwrap();
        assert!(matches!(
            y.set_data(vec![0.0, 0.0]),
            Err(TensorError::NotALeaf)
        ));
    }

    #[test]
    fn grad_accumulates_across_contributions() {
        let t = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        t.accumulate_grad(&[1.0, 1.0]);
        t.accumulate_grad(&[0.5, -1.0]);
        assert_eq!(t.grad().unwrap(), vec![1.5, 0.0]);
        t.clear_grad();
        assert!(t.grad().is_none());
    }

    #[test]
    fn no_grad_suppresses_recording() {
        let x = Tensor::param(&[2], vec![1.0, -1.0]).unwrap();
        let y = no_grad(|| crate::ops::relu(&x).unwrap());
        assert!(!y.requires_grad());
        assert!(y.parents().is_empty());
    }
}
