//! Differentiable building blocks expressed directly on a [`Tape`].

use alloc::vec::Vec;

use crate::autodiff::{Axis, Tape, Var};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// A convolution's weight and optional bias on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvVars {
    pub weight: Var,
    pub bias: Option<Var>,
}

/// Output of the frequency decomposition layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decomposed {
    /// `[2, D, H, W]` probability maps `(p_low, p_high)`.
    pub probs: Var,
    pub low: Var,
    pub high: Var,
}

/// `P = softmax(conv3d(V))`, `V_low = p_low * V`, `V_high = p_high * V`.
pub fn decomposition_forward<T: Scalar>(tape: &mut Tape<T>, theta: ConvVars, features: Var) -> Result<Decomposed> {
    let c = tape.shape(features)[0];
    let ks = tape.shape(theta.weight);
    if ks.len() != 5 || ks[0] != 2 || ks[1] != c {
        return Err(shape_err!(
            "decomposition kernel {:?} does not map {c} channels to 2 maps",
            ks
        ));
    }
    let logits = tape.conv3d(features, theta.weight, theta.bias)?;
    let probs = tape.softmax_channels(logits)?;
    let low = tape.gate(probs, 0, features)?;
    let high = tape.gate(probs, 1, features)?;
    Ok(Decomposed { probs, low, high })
}

/// Axis orders of the three refinement branches.
pub const BRANCH_AXES: [[Axis; 3]; 3] = [
    [Axis::Depth, Axis::Height, Axis::Width],
    [Axis::Height, Axis::Width, Axis::Depth],
    [Axis::Width, Axis::Depth, Axis::Height],
];

/// Sum of three branches, each three 1D convolutions along its axis order,
/// with a ReLU between consecutive convolutions when `relu` is set.
pub fn refinement_forward<T: Scalar>(
    tape: &mut Tape<T>,
    kernels: &[[ConvVars; 3]; 3],
    input: Var,
    relu: bool,
) -> Result<Var> {
    let mut branches: Vec<Var> = Vec::with_capacity(3);
    for (axes, convs) in BRANCH_AXES.iter().zip(kernels) {
        branches.push(refinement_branch(tape, convs, axes, input, relu)?);
    }
    let s = tape.add(branches[0], branches[1])?;
    tape.add(s, branches[2])
}

/// One refinement branch.
pub fn refinement_branch<T: Scalar>(
    tape: &mut Tape<T>,
    convs: &[ConvVars; 3],
    axes: &[Axis; 3],
    input: Var,
    relu: bool,
) -> Result<Var> {
    let mut x = input;
    for (i, (conv, &axis)) in convs.iter().zip(axes).enumerate() {
        x = tape.conv1d_axis(x, conv.weight, axis, conv.bias)?;
        if relu && i < 2 {
            x = tape.relu(x);
        }
    }
    Ok(x)
}
