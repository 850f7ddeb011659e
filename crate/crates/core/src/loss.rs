//! Task losses: per-head cross-entropies, the symmetric divergence tying
//! retrieval attention to estimated rationales, and their weighted sum.

use serde::{Deserialize, Serialize};

use crate::compute::{Graph, NodeId};

/// Loss weights (lambda1, lambda2, lambda3) for the retrieval, rationale and
/// stance cross-entropies plus gamma for the rationale regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    /// Defaults reproduce the selected configuration of the reference
    /// experiments: 0.2, 12.0, 1.1 and 1.9.
    fn default() -> LossWeights {
        LossWeights {
            lambda1: 0.2,
            lambda2: 12.0,
            lambda3: 1.1,
            gamma: 1.9,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) {
        assert!(
            self.lambda1 >= 0.0 && self.lambda2 >= 0.0 && self.lambda3 >= 0.0 && self.gamma >= 0.0,
            "loss weights must be non-negative"
        );
    }
}

/// `-log(clamp(p[y]))` for a probability vector node.
pub fn cross_entropy(g: &mut Graph, p: NodeId, y: usize) -> NodeId {
    let n = g.value(p).len();
    assert!(y < n, "class index {y} out of range for {n} classes");
    let log_p = g.log_clamped(p);
    let picked = g.pick(log_p, y);
    g.scale_shift(picked, -1.0, 0.0)
}

/// Mean cross-entropy of per-sentence rationale rows against 0/1 targets.
pub fn rationale_loss(g: &mut Graph, p_r: &[NodeId], y_r: &[u8]) -> NodeId {
    assert_eq!(p_r.len(), y_r.len(), "rationale target length mismatch");
    assert!(!p_r.is_empty(), "rationale loss over no sentences");
    let terms: Vec<NodeId> = p_r
        .iter()
        .zip(y_r)
        .map(|(&p, &y)| cross_entropy(g, p, y as usize))
        .collect();
    let total = g.add_n(&terms);
    g.scale_shift(total, 1.0 / terms.len() as f64, 0.0)
}

/// Elementwise binary cross-divergence
/// `-(sum_i p_i log q_i + (1 - p_i) log(1 - q_i))`, with both inputs clamped
/// into `[eps, 1 - eps]` before the logarithms. Gradients flow into both
/// arguments.
pub fn rr_divergence(g: &mut Graph, p: NodeId, q: NodeId) -> NodeId {
    assert_eq!(
        g.value(p).len(),
        g.value(q).len(),
        "divergence length mismatch"
    );
    let p = g.clamp_unit(p);
    let q = g.clamp_unit(q);
    let log_q = g.log_clamped(q);
    let one_minus_q = g.scale_shift(q, -1.0, 1.0);
    let log_one_minus_q = g.log_clamped(one_minus_q);
    let one_minus_p = g.scale_shift(p, -1.0, 1.0);
    let hit = g.mul(p, log_q);
    let miss = g.mul(one_minus_p, log_one_minus_q);
    let sum = g.add(hit, miss);
    let total = g.sum_all(sum);
    g.scale_shift(total, -1.0, 0.0)
}

/// Symmetric rationale regularizer between the retrieval head's sentence
/// attention and the estimated rationale probabilities.
pub fn rr_loss(g: &mut Graph, sentence_alphas: NodeId, p_r1: NodeId) -> NodeId {
    let forward = rr_divergence(g, sentence_alphas, p_r1);
    let backward = rr_divergence(g, p_r1, sentence_alphas);
    g.add(forward, backward)
}

/// Node handles for the weighted joint loss and its components.
pub struct JointLossNodes {
    pub l_ret: NodeId,
    pub l_rat: NodeId,
    pub l_sta: NodeId,
    pub l_rr: NodeId,
    pub total: NodeId,
}

/// `lambda1 L_ret + lambda2 L_rat + lambda3 L_sta + gamma L_RR`.
pub fn joint_loss(
    g: &mut Graph,
    l_ret: NodeId,
    l_rat: NodeId,
    l_sta: NodeId,
    l_rr: NodeId,
    weights: &LossWeights,
) -> JointLossNodes {
    weights.validate();
    let a = g.scale_shift(l_ret, weights.lambda1, 0.0);
    let b = g.scale_shift(l_rat, weights.lambda2, 0.0);
    let c = g.scale_shift(l_sta, weights.lambda3, 0.0);
    let d = g.scale_shift(l_rr, weights.gamma, 0.0);
    let ab = g.add(a, b);
    let abc = g.add(ab, c);
    let total = g.add(abc, d);
    JointLossNodes {
        l_ret,
        l_rat,
        l_sta,
        l_rr,
        total,
    }
}

/// Extracted loss values for one instance or one epoch. `l_total` is the
/// weighted sum; the components are unweighted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_ret: f64,
    pub l_rat: f64,
    pub l_sta: f64,
    pub l_rr: f64,
    pub l_total: f64,
}

impl LossBreakdown {
    pub fn from_graph(g: &Graph, nodes: &JointLossNodes) -> LossBreakdown {
        LossBreakdown {
            l_ret: g.value(nodes.l_ret).as_scalar(),
            l_rat: g.value(nodes.l_rat).as_scalar(),
            l_sta: g.value(nodes.l_sta).as_scalar(),
            l_rr: g.value(nodes.l_rr).as_scalar(),
            l_total: g.value(nodes.total).as_scalar(),
        }
    }

    pub fn add_assign(&mut self, other: &LossBreakdown) {
        self.l_ret += other.l_ret;
        self.l_rat += other.l_rat;
        self.l_sta += other.l_sta;
        self.l_rr += other.l_rr;
        self.l_total += other.l_total;
    }

    pub fn scaled(&self, factor: f64) -> LossBreakdown {
        LossBreakdown {
            l_ret: self.l_ret * factor,
            l_rat: self.l_rat * factor,
            l_sta: self.l_sta * factor,
            l_rr: self.l_rr * factor,
            l_total: self.l_total * factor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::{grad_check_multi, Tensor, LOG_CLAMP_EPS};
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eval_ce(p: Vec<f64>, y: usize) -> f64 {
        let mut g = Graph::new();
        let pid = g.leaf(Tensor::vector(p));
        let ce = cross_entropy(&mut g, pid, y);
        g.value(ce).as_scalar()
    }

    fn eval_rr_divergence(p: Vec<f64>, q: Vec<f64>) -> f64 {
        let mut g = Graph::new();
        let pid = g.leaf(Tensor::vector(p));
        let qid = g.leaf(Tensor::vector(q));
        let d = rr_divergence(&mut g, pid, qid);
        g.value(d).as_scalar()
    }

    fn eval_rr_loss(a: Vec<f64>, y: Vec<f64>) -> f64 {
        let mut g = Graph::new();
        let aid = g.leaf(Tensor::vector(a));
        let yid = g.leaf(Tensor::vector(y));
        let l = rr_loss(&mut g, aid, yid);
        g.value(l).as_scalar()
    }

    fn binary_entropy(p: f64) -> f64 {
        let p = p.clamp(LOG_CLAMP_EPS, 1.0 - LOG_CLAMP_EPS);
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    #[test]
    fn cross_entropy_confident_correct_is_tiny() {
        let eps = 1e-7;
        let loss = eval_ce(vec![1.0 - eps, eps], 0);
        assert!(loss <= 2e-7, "loss {loss}");
    }

    #[test]
    fn cross_entropy_even_pair_is_ln_two() {
        let loss = eval_ce(vec![0.5, 0.5], 1);
        assert!((loss - std::f64::consts::LN_2).abs() <= 1e-6);
    }

    #[test]
    fn cross_entropy_uniform_three_way_is_ln_three() {
        for y in 0..3 {
            let loss = eval_ce(vec![1.0 / 3.0; 3], y);
            assert!((loss - 3.0_f64.ln()).abs() <= 1e-6);
        }
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn cross_entropy_rejects_bad_index() {
        eval_ce(vec![0.5, 0.5], 2);
    }

    #[test]
    fn rr_divergence_at_half_is_ln_two() {
        let d = eval_rr_divergence(vec![0.5], vec![0.5]);
        assert!((d - std::f64::consts::LN_2).abs() <= 1e-6);
    }

    #[test]
    fn rr_divergence_clamps_saturated_inputs() {
        let eps = LOG_CLAMP_EPS;
        let expect = -((1.0 - eps) * (1.0 - eps).ln() + eps * eps.ln());
        let d = eval_rr_divergence(vec![1.0], vec![1.0]);
        assert!((d - expect).abs() <= 1e-12, "d={d} expect={expect}");
        assert!((d - 1.7e-6).abs() < 2e-7, "clamped value should be ~1.7e-6");
    }

    #[test]
    fn rr_divergence_dominates_entropy_with_equality_at_p_eq_q() {
        // Per-component Gibbs inequality: D(p||q) >= sum_i H_b(p_i), equal
        // only at p = q.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let n = rng.gen_range(1..6);
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let d = eval_rr_divergence(p.clone(), q.clone());
            let h: f64 = p.iter().map(|&v| binary_entropy(v)).sum();
            assert!(d >= h - 1e-9, "Gibbs violated: D={d} H={h}");
            let d_self = eval_rr_divergence(p.clone(), p.clone());
            assert!((d_self - h).abs() <= 1e-6, "equality at p=q failed");
            let far = p.iter().zip(&q).any(|(a, b)| (a - b).abs() > 1e-3);
            if far {
                assert!(d > h + 1e-9, "strictness failed for distinct p, q");
            }
        }
    }

    #[test]
    fn rr_loss_at_uniform_half_is_four_ln_two() {
        let l = eval_rr_loss(vec![0.5, 0.5], vec![0.5, 0.5]);
        assert!((l - 4.0 * std::f64::consts::LN_2).abs() <= 1e-5);
    }

    #[test]
    fn rr_loss_is_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..5);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let l1 = eval_rr_loss(a.clone(), b.clone());
            let l2 = eval_rr_loss(b, a);
            assert_eq!(l1.to_bits(), l2.to_bits());
        }
    }

    #[test]
    fn rr_loss_hand_computed_single_element() {
        // alpha=[0.9], y=[0.1]: both directions evaluate to
        // -(0.9 ln 0.1 + 0.1 ln 0.9), so the sum is twice that.
        let expect = 2.0 * -(0.9 * 0.1_f64.ln() + 0.1 * 0.9_f64.ln());
        let l = eval_rr_loss(vec![0.9], vec![0.1]);
        assert!((l - expect).abs() <= 1e-9, "l={l} expect={expect}");
        assert!((l - 4.1657).abs() <= 1e-3);
    }

    #[test]
    fn rr_loss_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = rng.gen_range(1..5);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            assert!(eval_rr_loss(a, b) >= 0.0);
        }
    }

    #[test]
    fn rr_loss_gradients_flow_to_both_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..0.95)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..0.95)).collect();
        let err = grad_check_multi(
            |g, ids| rr_loss(g, ids[0], ids[1]),
            &[Tensor::vector(a), Tensor::vector(b)],
            1e-4,
        );
        assert!(err <= 1e-4, "error {err}");
    }

    fn eval_joint(values: [f64; 4], w: &LossWeights) -> LossBreakdown {
        let mut g = Graph::new();
        let l_ret = g.leaf(Tensor::scalar(values[0]));
        let l_rat = g.leaf(Tensor::scalar(values[1]));
        let l_sta = g.leaf(Tensor::scalar(values[2]));
        let l_rr = g.leaf(Tensor::scalar(values[3]));
        let nodes = joint_loss(&mut g, l_ret, l_rat, l_sta, l_rr, w);
        LossBreakdown::from_graph(&g, &nodes)
    }

    #[test]
    fn joint_loss_with_selected_weights_on_unit_losses() {
        let w = LossWeights::default();
        let out = eval_joint([1.0, 1.0, 1.0, 1.0], &w);
        assert!((out.l_total - 15.2).abs() <= 1e-12);
    }

    #[test]
    fn joint_loss_gamma_zero_ignores_rr() {
        let w = LossWeights {
            gamma: 0.0,
            ..LossWeights::default()
        };
        let a = eval_joint([0.3, 0.7, 0.2, 5.0], &w);
        let b = eval_joint([0.3, 0.7, 0.2, 50.0], &w);
        assert_eq!(a.l_total, b.l_total);
    }

    #[test]
    fn joint_loss_all_zero_weights() {
        let w = LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            gamma: 0.0,
        };
        let out = eval_joint([3.0, 1.0, 2.0, 4.0], &w);
        assert_eq!(out.l_total, 0.0);
    }

    #[test]
    fn joint_loss_total_is_exact_weighted_sum() {
        let w = LossWeights {
            lambda1: 0.9,
            lambda2: 11.1,
            lambda3: 2.6,
            gamma: 2.2,
        };
        let v = [0.37, 1.21, 0.05, 2.9];
        let out = eval_joint(v, &w);
        let expect = ((w.lambda1 * v[0] + w.lambda2 * v[1]) + w.lambda3 * v[2]) + w.gamma * v[3];
        assert_eq!(out.l_total.to_bits(), expect.to_bits());
    }

    #[test]
    fn joint_loss_linear_in_each_component() {
        let w = LossWeights::default();
        let base = eval_joint([1.0, 0.0, 0.0, 0.0], &w);
        let tripled = eval_joint([3.0, 0.0, 0.0, 0.0], &w);
        assert!((tripled.l_total - 3.0 * base.l_total).abs() <= 1e-12);
    }

    #[test]
    #[should_panic(expected = "non-negative")]
    fn joint_loss_rejects_negative_weight() {
        let w = LossWeights {
            lambda1: -0.1,
            ..LossWeights::default()
        };
        eval_joint([1.0, 1.0, 1.0, 1.0], &w);
    }

    #[test]
    fn rationale_loss_averages_sentences() {
        let mut g = Graph::new();
        let p0 = g.leaf(Tensor::vector(vec![0.5, 0.5]));
        let p1 = g.leaf(Tensor::vector(vec![0.5, 0.5]));
        let loss = rationale_loss(&mut g, &[p0, p1], &[0, 1]);
        let v = g.value(loss).as_scalar();
        assert!((v - std::f64::consts::LN_2).abs() <= 1e-9);
    }

    #[test]
    fn gradients_flow_through_cross_entropy_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let logits: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let err = grad_check_multi(
            |g, ids| {
                let p = g.softmax(ids[0]);
                cross_entropy(g, p, 1)
            },
            &[Tensor::vector(logits)],
            1e-4,
        );
        assert!(err <= 1e-4, "error {err}");
    }
}
