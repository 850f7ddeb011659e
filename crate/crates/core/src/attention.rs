//! Attention pooling: word-level and sentence-level layers plus their
//! hierarchical composition.
//!
//! Both levels share one form: project each unit through a tanh affine map,
//! score the projections with a second affine map down to a scalar, softmax
//! the scores, and pool the projected units by those weights.

use rand::Rng;

use crate::compute::{init_uniform, BoundParams, Graph, NodeId, ParameterMap};

/// Node handles for one attention level's four affine parameters.
#[derive(Clone, Copy)]
pub struct AttentionParams {
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
}

impl AttentionParams {
    /// Looks up `<prefix>.{w1,b1,w2,b2}` among bound parameters.
    pub fn from_bound(bound: &BoundParams, prefix: &str) -> AttentionParams {
        AttentionParams {
            w1: bound.get(&format!("{prefix}.w1")),
            b1: bound.get(&format!("{prefix}.b1")),
            w2: bound.get(&format!("{prefix}.w2")),
            b2: bound.get(&format!("{prefix}.b2")),
        }
    }
}

/// Registers one attention level's parameters under `<prefix>.*`.
pub fn init_attention_params(
    params: &mut ParameterMap,
    prefix: &str,
    d: usize,
    rng: &mut impl Rng,
) {
    params.insert(format!("{prefix}.w1"), init_uniform(vec![d, d], d, rng));
    params.insert(format!("{prefix}.b1"), init_uniform(vec![d], d, rng));
    params.insert(format!("{prefix}.w2"), init_uniform(vec![1, d], d, rng));
    params.insert(format!("{prefix}.b2"), init_uniform(vec![1], d, rng));
}

/// Pooled vector plus the attention distribution that produced it.
pub struct AttentionResult {
    pub pooled: NodeId,
    pub alphas: NodeId,
}

/// Attention over the rows of `h: [n, d]`; `n >= 1`.
pub fn word_attention(g: &mut Graph, h: NodeId, p: &AttentionParams) -> AttentionResult {
    attend(g, h, p)
}

/// Attention over per-sentence vectors stacked into `[n, d]`. Identical in
/// form to [`word_attention`]; kept separate because the two levels carry
/// separate parameters.
pub fn sentence_attention(g: &mut Graph, units: NodeId, p: &AttentionParams) -> AttentionResult {
    attend(g, units, p)
}

fn attend(g: &mut Graph, h: NodeId, p: &AttentionParams) -> AttentionResult {
    let n = g.value(h).rows();
    assert!(n >= 1, "attention over an empty input");
    let projected = g.affine_rows(h, p.w1, p.b1);
    let u = g.tanh(projected);
    let scores_col = g.affine_rows(u, p.w2, p.b2);
    let scores = g.reshape(scores_col, vec![n]);
    let alphas = g.softmax(scores);
    let pooled = g.weighted_sum(u, alphas);
    AttentionResult { pooled, alphas }
}

/// Two-level composition over a document's units (title and/or sentences):
/// word attention pools each unit, sentence attention pools the unit
/// vectors.
pub fn han(
    g: &mut Graph,
    units: &[NodeId],
    word: &AttentionParams,
    sent: &AttentionParams,
) -> AttentionResult {
    assert!(!units.is_empty(), "han over no units");
    let pooled_units: Vec<NodeId> = units
        .iter()
        .map(|&unit| word_attention(g, unit, word).pooled)
        .collect();
    let stacked = g.stack_rows(&pooled_units);
    sentence_attention(g, stacked, sent)
}
