#![allow(dead_code)]

//! Central-difference gradient checker for tape-built scalar functions.

use freqsynth_core::{Tape, Tensor, Var};

pub const STEP: f64 = 1e-3;
pub const RTOL: f64 = 1e-4;
/// Magnitude below which a gradient entry is compared absolutely.
pub const FLOOR: f64 = 1e-4;
/// Step used to re-examine entries whose central difference at [`STEP`]
/// disagrees, which happens when the stencil straddles a ReLU kink or the
/// step is too coarse for the local curvature. A wrong analytic gradient
/// disagrees at every step.
pub const KINK_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct GradReport {
    pub checked: usize,
    pub worst_rel: f64,
    /// `(input, element, analytic, numeric)` of the worst entry.
    pub worst_at: (usize, usize, f64, f64),
    /// Entries re-examined with [`KINK_STEP`].
    pub kinks: usize,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.worst_rel <= RTOL
    }
}

fn eval<F>(inputs: &[Tensor<f64>], f: &F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t)).collect();
    let out = f(&mut tape, &vars);
    tape.scalar(out)
}

/// Compares reverse-mode gradients of `f` against central differences for
/// every element of every input.
pub fn check<F>(inputs: &[Tensor<f64>], f: F) -> GradReport
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.set_requires_grad(true);
            tape.leaf(&t)
        })
        .collect();
    let out = f(&mut tape, &vars);
    tape.backward(out).expect("scalar output");
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad(v).expect("leaf gradient").to_vec()).collect();

    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut worst = 0.0f64;
    let mut worst_at = (0, 0, 0.0, 0.0);
    let mut kinks = 0;
    let mut checked = 0;
    for t in 0..work.len() {
        for i in 0..work[t].len() {
            let a = analytic[t][i];
            let mut numeric = central(&mut work, t, i, STEP, &f);
            if rel_err(a, numeric) > RTOL {
                kinks += 1;
                numeric = central(&mut work, t, i, KINK_STEP, &f);
            }
            checked += 1;
            let rel = rel_err(a, numeric);
            if rel > worst {
                worst = rel;
                worst_at = (t, i, a, numeric);
            }
        }
    }
    GradReport {
        checked,
        worst_rel: worst,
        worst_at,
        kinks,
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Central difference for element `i` of input `t`.
fn central<F>(work: &mut [Tensor<f64>], t: usize, i: usize, h: f64, f: &F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let orig = work[t].data()[i];
    work[t].data_mut()[i] = orig + h;
    let up = eval(work, f);
    work[t].data_mut()[i] = orig - h;
    let down = eval(work, f);
    work[t].data_mut()[i] = orig;
    (up - down) / (2.0 * h)
}
