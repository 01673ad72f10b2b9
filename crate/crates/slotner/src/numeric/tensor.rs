use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::{Error, Result};

/// Node ids are globally monotonic, so an output always has a larger id than
/// every input it was computed from. Descending id order is therefore a valid
/// reverse-topological order for the backward pass.
static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

pub(crate) type BackwardFn = Box<dyn Fn(&[f64])>;

pub(crate) struct Node {
    pub(crate) id: u64,
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Vec<f64>,
    pub(crate) requires_grad: bool,
    pub(crate) grad: Option<Vec<f64>>,
    pub(crate) parents: Vec<Tensor>,
    pub(crate) backward_fn: Option<BackwardFn>,
}

/// Dense n-dimensional f64 array, row-major, with an optional gradient slot.
///
/// Cloning a `Tensor` clones the handle, not the storage; two clones see the
/// same data and gradient.
#[derive(Clone)]
pub struct Tensor {
    pub(crate) inner: Rc<RefCell<Node>>,
}

impl Tensor {
    fn from_node(node: Node) -> Tensor {
        Tensor {
            inner: Rc::new(RefCell::new(node)),
        }
    }

    fn leaf(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Dimension(format!(
                "shape {:?} implies {} elements but {} were given",
                shape,
                numel,
                data.len()
            )));
        }
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite tensor data");
        Ok(Tensor::from_node(Node {
            id: next_id(),
            shape,
            data,
            requires_grad,
            grad: None,
            parents: Vec::new(),
            backward_fn: None,
        }))
    }

    /// Constant tensor; gradients never flow into it.
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Tensor::leaf(data, shape.to_vec(), false)
    }

    /// Trainable leaf tensor (gradients accumulate into it on backward).
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Tensor::leaf(data, shape.to_vec(), true)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel = shape.iter().product();
        Tensor::leaf(vec![0.0; numel], shape.to_vec(), false).expect("zeros")
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::leaf(vec![value], vec![1], false).expect("scalar")
    }

    /// Trainable leaf drawn elementwise from Uniform(lo, hi).
    pub fn uniform_param(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.gen_range(lo..hi)).collect();
        Tensor::leaf(data, shape.to_vec(), true).expect("uniform_param")
    }

    /// Wires up an op output: records parents and the backward closure only
    /// when some parent requires gradients.
    pub(crate) fn op_output(
        data: Vec<f64>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: impl Fn(&[f64]) + 'static,
    ) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite op output");
        let needs_grad = parents.iter().any(|p| p.requires_grad());
        Tensor::from_node(Node {
            id: next_id(),
            shape,
            data,
            requires_grad: needs_grad,
            grad: None,
            parents: if needs_grad { parents } else { Vec::new() },
            backward_fn: if needs_grad {
                Some(Box::new(backward))
            } else {
                None
            },
        })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn ndim(&self) -> usize {
        self.inner.borrow().shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().data.len()
    }

    /// Borrow the flat row-major storage. Release the borrow before mutating
    /// the same tensor.
    pub fn data(&self) -> Ref<'_, [f64]> {
        Ref::map(self.inner.borrow(), |n| n.data.as_slice())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.borrow().data.clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        let node = self.inner.borrow();
        assert_eq!(node.data.len(), 1, "item() on tensor of {} elements", node.data.len());
        node.data[0]
    }

    pub fn get(&self, flat_index: usize) -> f64 {
        self.inner.borrow().data[flat_index]
    }

    pub fn set(&self, flat_index: usize, value: f64) {
        self.inner.borrow_mut().data[flat_index] = value;
    }

    /// Replace the storage wholesale; length must match.
    pub fn set_data(&self, data: &[f64]) {
        let mut node = self.inner.borrow_mut();
        assert_eq!(node.data.len(), data.len(), "set_data length mismatch");
        node.data.copy_from_slice(data);
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    pub(crate) fn accumulate_grad(&self, incoming: &[f64]) {
        let mut node = self.inner.borrow_mut();
        if !node.requires_grad {
            return;
        }
        debug_assert_eq!(node.data.len(), incoming.len());
        debug_assert!(incoming.iter().all(|v| v.is_finite()), "non-finite gradient");
        match &mut node.grad {
            Some(g) => {
                for (dst, src) in g.iter_mut().zip(incoming) {
                    *dst += src;
                }
            }
            None => node.grad = Some(incoming.to_vec()),
        }
    }

    /// Reverse-mode backward pass from a scalar loss.
    ///
    /// Gradients accumulate additively: a tensor consumed by several
    /// operations receives the sum of all path gradients, and repeated
    /// `backward` calls without `zero_grad` keep adding.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Dimension(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        self.inner.borrow_mut().grad = Some(vec![1.0]);

        // Gather every node reachable from the loss, then sweep in
        // descending creation order (see NEXT_ID).
        let mut seen: HashSet<u64> = HashSet::new();
        let mut order: Vec<Tensor> = Vec::new();
        let mut stack: Vec<Tensor> = vec![self.clone()];
        while let Some(t) = stack.pop() {
            let id = t.inner.borrow().id;
            if !seen.insert(id) {
                continue;
            }
            for p in t.inner.borrow().parents.iter() {
                stack.push(p.clone());
            }
            order.push(t);
        }
        order.sort_by_key(|t| std::cmp::Reverse(t.inner.borrow().id));

        for t in &order {
            let node = t.inner.borrow();
            if let (Some(grad), Some(backward)) = (node.grad.clone(), node.backward_fn.as_ref()) {
                // The closure only touches parent nodes, never `t` itself,
                // so holding this borrow across the call is fine.
                backward(&grad);
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let node = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("shape", &node.shape)
            .field("requires_grad", &node.requires_grad)
            .field("data", &node.data)
            .finish()
    }
}
