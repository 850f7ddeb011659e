//! Differentiable-compute primitives: tensors, a reverse-mode tape, and the
//! finite-difference gradient checker that every trained module is verified
//! against.

mod check;
mod graph;
mod tensor;

pub use check::{grad_check, grad_check_multi};
pub use graph::{BoundParams, Gradients, Graph, NodeId};
pub use tensor::{init_uniform, ParameterMap, Tensor};

/// Probabilities are clamped into `[EPS, 1 - EPS]` before every logarithm,
/// pipeline-wide.
pub const LOG_CLAMP_EPS: f64 = 1e-7;

/// Numerically stable softmax of a slice.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    softmax_into(x, &mut out);
    out
}

pub(crate) fn softmax_into(x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        let e = (v - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}
