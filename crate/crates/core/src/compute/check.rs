//! Central-difference gradient checking.
//!
//! The oracle for every differentiable module: rebuilds the computation at
//! perturbed inputs and compares analytic gradients against
//! `(f(x+h) - f(x-h)) / 2h` coordinate by coordinate.

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;

/// Relative-error comparison of analytic and finite-difference gradients for
/// a scalar function of several tensor inputs.
///
/// Returns the maximum over all coordinates of
/// `|g_analytic - g_fd| / max(1, |g_fd|)`. Panics if the function value is
/// not finite or `h` lies outside `[1e-6, 1e-3]`.
pub fn grad_check_multi<F>(f: F, inputs: &[Tensor], h: f64) -> f64
where
    F: Fn(&mut Graph, &[NodeId]) -> NodeId,
{
    assert!((1e-6..=1e-3).contains(&h), "step h={h} out of range");
    let mut graph = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| graph.leaf(t.clone())).collect();
    let root = f(&mut graph, &ids);
    let value = graph.value(root).as_scalar();
    assert!(value.is_finite(), "function value {value} is not finite");
    let grads = graph.backward(root);

    let eval = |inputs: &[Tensor]| -> f64 {
        let mut graph = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| graph.leaf(t.clone())).collect();
        let root = f(&mut graph, &ids);
        graph.value(root).as_scalar()
    };

    let mut worst = 0.0_f64;
    for (which, input) in inputs.iter().enumerate() {
        let analytic = grads.get(ids[which]).cloned();
        for coord in 0..input.len() {
            let x0 = input.data()[coord];
            let mut plus = inputs.to_vec();
            plus[which] = input.with_value(coord, x0 + h);
            let mut minus = inputs.to_vec();
            minus[which] = input.with_value(coord, x0 - h);
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let ga = analytic.as_ref().map_or(0.0, |t| t.data()[coord]);
            let err = (ga - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

/// Single-input convenience wrapper around [`grad_check_multi`].
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> f64
where
    F: Fn(&mut Graph, NodeId) -> NodeId,
{
    grad_check_multi(|g, ids| f(g, ids[0]), std::slice::from_ref(x), h)
}
