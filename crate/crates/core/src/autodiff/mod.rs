//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every operation executed through it. Values live in
//! the tape and are addressed by [`Var`] handles; [`Tape::backward`] replays
//! the record in reverse and leaves gradients on every leaf that requires
//! them. Leaf gradients accumulate across backward calls.

mod kernels;
mod ops;


use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Spatial axis of a `[C, D, H, W]` tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Depth,
    Height,
    Width,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Depth, Axis::Height, Axis::Width];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| arg_err!("axis index {i} is not one of 0 (depth), 1 (height), 2 (width)"))
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "depth" | "d" => Ok(Axis::Depth),
            "height" | "h" => Ok(Axis::Height),
            "width" | "w" => Ok(Axis::Width),
            other => Err(arg_err!("unknown axis tag {other:?}")),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Axis::Depth => 0,
            Axis::Height => 1,
            Axis::Width => 2,
        }
    }

    /// Box extents of a width-`k` kernel lying along this axis.
    pub(crate) fn extents(self, k: usize) -> [usize; 3] {
        let mut e = [1; 3];
        e[self.index()] = k;
        e
    }
}

/// Which side of the relativistic game a loss is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaganRole {
    Discriminator,
    Generator,
}

#[derive(Debug, Clone)]
pub(crate) enum Op<T> {
    Leaf,
    Conv {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        extents: [usize; 3],
    },
    Softmax(Var),
    Gate {
        probs: Var,
        channel: usize,
        features: Var,
    },
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Mean(Var),
    L1Mean(Var, Var),
    AvgPool2(Var),
    Upsample2(Var),
    Concat(Var, Var),
    GlobalAvgPool(Var),
    Ragan {
        real: Vec<Var>,
        fake: Vec<Var>,
        role: RaganRole,
    },
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv {
                input, kernel, bias, ..
            } => {
                let mut v = vec![*input, *kernel];
                v.extend(bias);
                v
            }
            Op::Softmax(a)
            | Op::Relu(a)
            | Op::Scale(a, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::AvgPool2(a)
            | Op::Upsample2(a)
            | Op::GlobalAvgPool(a) => vec![*a],
            Op::Gate {
                probs, features, ..
            } => vec![*probs, *features],
            Op::Add(a, b) | Op::Sub(a, b) | Op::L1Mean(a, b) | Op::Concat(a, b) => vec![*a, *b],
            Op::Ragan { real, fake, .. } => real.iter().chain(fake).copied().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub requires_grad: bool,
    pub grad: Option<Vec<T>>,
    pub op: Op<T>,
}

/// Computation record: values, their producing operations, and gradients.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf holding a copy of `t`; it takes part in
    /// differentiation iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor<T>) -> Var {
        self.push_leaf(t.shape().to_vec(), t.data().to_vec(), t.requires_grad())
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, t: &Tensor<T>) -> Var {
        self.push_leaf(t.shape().to_vec(), t.data().to_vec(), false)
    }

    /// Records a leaf from owned parts.
    pub fn constant_from(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.push_leaf(t.shape().to_vec(), t.into_data(), false))
    }

    fn push_leaf(&mut self, shape: Vec<usize>, data: Vec<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            shape,
            data,
            requires_grad,
            grad: None,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, data: Vec<T>, op: Op<T>) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            shape,
            data,
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// The single element of a scalar value.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].data[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        Tensor::new(&n.shape, n.data.clone()).expect("tape values are well-formed")
    }

    /// Gradient currently stored on a leaf.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Adds the gradient of leaf `v` into `t`'s gradient buffer.
    pub fn export_grad(&self, v: Var, t: &mut Tensor<T>) -> Result<()> {
        match self.grad(v) {
            Some(g) => t.accumulate_grad(g),
            None => {
                let zeros = vec![T::zero(); t.len()];
                t.accumulate_grad(&zeros)
            }
        }
    }

    /// Resets every stored gradient.
    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(arg_err!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            ));
        }
        for n in &mut self.nodes {
            if !matches!(n.op, Op::Leaf) {
                n.grad = None;
            }
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.accumulate(loss, vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let node = &mut self.nodes[idx];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(g) = node.grad.take() else { continue };
            let contributions = ops::vjp(self, Var(idx), &g);
            for (v, gv) in contributions {
                if self.nodes[v.0].requires_grad {
                    self.accumulate(v, gv);
                }
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Vec<T>) {
        let node = &mut self.nodes[v.0];
        debug_assert_eq!(g.len(), node.data.len());
        match &mut node.grad {
            Some(buf) => buf.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
            None => node.grad = Some(g),
        }
    }

    pub(crate) fn check_same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(alloc::format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }
}
