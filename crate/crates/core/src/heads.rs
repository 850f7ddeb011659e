//! The three task heads and the scheduled-sampling gate that feeds rationale
//! selections into stance prediction.
//!
//! Parameter layout: the retrieval head owns `attn.retrieval.{word,sent}`;
//! rationale and stance share sentence representations through
//! `attn.rationale.word` (the stance head also pools the claim with it);
//! stance pools its selected sentences with `attn.stance.sent`. Each head
//! has a two-layer MLP under `mlp.<head>.*`.

use rand::Rng;

use crate::attention::{
    han, init_attention_params, sentence_attention, word_attention, AttentionParams,
};
use crate::compute::{init_uniform, BoundParams, Graph, NodeId, ParameterMap};
use crate::encoder::{encode, EncodedSequence, TokenizedSequence};

/// Node handles for one head's two-layer MLP.
#[derive(Clone, Copy)]
pub struct MlpParams {
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
}

impl MlpParams {
    pub fn from_bound(bound: &BoundParams, prefix: &str) -> MlpParams {
        MlpParams {
            w1: bound.get(&format!("{prefix}.w1")),
            b1: bound.get(&format!("{prefix}.b1")),
            w2: bound.get(&format!("{prefix}.w2")),
            b2: bound.get(&format!("{prefix}.b2")),
        }
    }
}

/// Registers a two-layer MLP (`in -> hidden -> classes`, tanh between).
pub fn init_mlp_params(
    params: &mut ParameterMap,
    prefix: &str,
    input: usize,
    hidden: usize,
    classes: usize,
    rng: &mut impl Rng,
) {
    params.insert(format!("{prefix}.w1"), init_uniform(vec![hidden, input], input, rng));
    params.insert(format!("{prefix}.b1"), init_uniform(vec![hidden], input, rng));
    params.insert(
        format!("{prefix}.w2"),
        init_uniform(vec![classes, hidden], hidden, rng),
    );
    params.insert(format!("{prefix}.b2"), init_uniform(vec![classes], hidden, rng));
}

/// `W2 tanh(W1 x + b1) + b2` on a vector input.
pub fn mlp(g: &mut Graph, x: NodeId, p: &MlpParams) -> NodeId {
    let hidden = g.affine_vec(p.w1, x, p.b1);
    let act = g.tanh(hidden);
    g.affine_vec(p.w2, act, p.b2)
}

/// Registers every head parameter for model width `d`.
///
/// MLP hidden layers are wider than `d`: the extra random features at
/// initialization let the class readouts separate with small weight updates.
pub fn init_head_params(params: &mut ParameterMap, d: usize, rng: &mut impl Rng) {
    let hidden = mlp_hidden_width(d);
    init_attention_params(params, "attn.retrieval.word", d, rng);
    init_attention_params(params, "attn.retrieval.sent", d, rng);
    init_attention_params(params, "attn.rationale.word", d, rng);
    init_attention_params(params, "attn.stance.sent", d, rng);
    init_mlp_params(params, "mlp.retrieval", d, hidden, 2, rng);
    init_mlp_params(params, "mlp.rationale", d, hidden, 2, rng);
    init_mlp_params(params, "mlp.stance", d, hidden, 3, rng);
}

/// Hidden width of the per-head MLPs.
pub fn mlp_hidden_width(d: usize) -> usize {
    d
}

/// Output of the abstract-retrieval head.
pub struct RetrievalHeadOut {
    /// `[p_b0, p_b1]`; index 1 is "relevant".
    pub p_b: NodeId,
    /// Sentence-level attention over `[title, s_1, ..., s_l]`.
    pub alphas: NodeId,
}

/// Relevance head: a hierarchical attention pool of the (title, sentences)
/// units, gated against the claim vector by a Hadamard product and a
/// two-class MLP.
pub fn abstract_retrieval_head(
    g: &mut Graph,
    bound: &BoundParams,
    h_claim: NodeId,
    h_title: NodeId,
    h_sentences: &[NodeId],
) -> RetrievalHeadOut {
    let word = AttentionParams::from_bound(bound, "attn.retrieval.word");
    let sent = AttentionParams::from_bound(bound, "attn.retrieval.sent");
    let mut units = Vec::with_capacity(1 + h_sentences.len());
    units.push(h_title);
    units.extend_from_slice(h_sentences);
    let doc = han(g, &units, &word, &sent);
    let claim_vec = word_attention(g, h_claim, &word).pooled;
    let gated = g.mul(claim_vec, doc.pooled);
    let mlp_params = MlpParams::from_bound(bound, "mlp.retrieval");
    let logits = mlp(g, gated, &mlp_params);
    RetrievalHeadOut {
        p_b: g.softmax(logits),
        alphas: doc.alphas,
    }
}

/// Output of the rationale head.
pub struct RationaleHeadOut {
    /// Per sentence `[p_r0, p_r1]`; index 1 is "rationale".
    pub p_r: Vec<NodeId>,
    /// Sentence representations, shared with the stance head.
    pub h_sentences: Vec<NodeId>,
}

/// Rationale head: pool each sentence with the shared word attention and
/// classify it as evidence or not.
pub fn rationale_head(
    g: &mut Graph,
    bound: &BoundParams,
    h_sentences: &[NodeId],
) -> RationaleHeadOut {
    assert!(!h_sentences.is_empty(), "rationale head needs a sentence");
    let word = AttentionParams::from_bound(bound, "attn.rationale.word");
    let mlp_params = MlpParams::from_bound(bound, "mlp.rationale");
    let mut p_r = Vec::with_capacity(h_sentences.len());
    let mut reps = Vec::with_capacity(h_sentences.len());
    for &h in h_sentences {
        let rep = word_attention(g, h, &word).pooled;
        let logits = mlp(g, rep, &mlp_params);
        p_r.push(g.softmax(logits));
        reps.push(rep);
    }
    RationaleHeadOut {
        p_r,
        h_sentences: reps,
    }
}

/// The sentence set the stance head attends over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationaleSelection {
    /// Indices fed to the stance head (never empty).
    pub indices: Vec<usize>,
    /// True when no sentence qualified and the head fell back to all
    /// sentences.
    pub used_fallback: bool,
}

impl RationaleSelection {
    /// The selection before the fallback: empty when the fallback fired.
    pub fn pre_fallback(&self) -> &[usize] {
        if self.used_fallback {
            &[]
        } else {
            &self.indices
        }
    }
}

/// Chooses the stance head's input sentences: gold rationales, or the
/// sentences whose estimated rationale probability wins. An empty result
/// falls back to every sentence.
pub fn select_rationales(
    p_r: &[[f64; 2]],
    gold_y_r: Option<&[u8]>,
    use_estimated: bool,
) -> RationaleSelection {
    let indices: Vec<usize> = if use_estimated {
        p_r.iter()
            .enumerate()
            .filter(|(_, p)| p[1] > p[0])
            .map(|(i, _)| i)
            .collect()
    } else {
        let gold = gold_y_r.expect("gold rationales required when not using estimates");
        assert_eq!(gold.len(), p_r.len(), "gold length mismatch");
        gold.iter()
            .enumerate()
            .filter(|(_, &y)| y == 1)
            .map(|(i, _)| i)
            .collect()
    };
    if indices.is_empty() {
        RationaleSelection {
            indices: (0..p_r.len()).collect(),
            used_fallback: true,
        }
    } else {
        RationaleSelection {
            indices,
            used_fallback: false,
        }
    }
}

/// Output of the stance head.
pub struct StanceHeadOut {
    /// `[p_e0, p_e1, p_e2]` over SUPPORT / REFUTE / NOINFO.
    pub p_e: NodeId,
    /// Attention over the selected sentences.
    pub alphas: NodeId,
}

/// Stance head: pool the selected sentence representations, gate against the
/// claim vector, and classify three ways.
pub fn stance_head(
    g: &mut Graph,
    bound: &BoundParams,
    h_claim: NodeId,
    selected_reps: &[NodeId],
) -> StanceHeadOut {
    assert!(!selected_reps.is_empty(), "stance head needs a sentence");
    let word = AttentionParams::from_bound(bound, "attn.rationale.word");
    let sent = AttentionParams::from_bound(bound, "attn.stance.sent");
    let claim_vec = word_attention(g, h_claim, &word).pooled;
    let stacked = g.stack_rows(selected_reps);
    let pooled = sentence_attention(g, stacked, &sent);
    let gated = g.mul(claim_vec, pooled.pooled);
    let mlp_params = MlpParams::from_bound(bound, "mlp.stance");
    let logits = mlp(g, gated, &mlp_params);
    StanceHeadOut {
        p_e: g.softmax(logits),
        alphas: pooled.alphas,
    }
}

/// Probability of feeding estimated (rather than gold) rationales to the
/// stance head at `current_epoch` of `total_epoch` (both 1-based).
///
/// Follows the half-sine ramp from 0 at the first epoch to 1 at the last;
/// a single-epoch run uses estimates from the start.
pub fn sample_probability(current_epoch: usize, total_epoch: usize) -> f64 {
    assert!(total_epoch >= 1, "total_epoch must be at least 1");
    assert!(
        (1..=total_epoch).contains(&current_epoch),
        "current_epoch {current_epoch} outside 1..={total_epoch}"
    );
    if total_epoch == 1 {
        return 1.0;
    }
    let fraction = (current_epoch - 1) as f64 / (total_epoch - 1) as f64;
    (std::f64::consts::FRAC_PI_2 * fraction).sin()
}

/// Everything one forward pass produces for a (claim, abstract) pair.
pub struct HeadOutputs {
    pub p_b: NodeId,
    pub p_r: Vec<NodeId>,
    pub p_e: NodeId,
    /// Estimated rationale probabilities `p_r[i][1]` as one vector node.
    pub p_r1: NodeId,
    /// Retrieval attention over `[title, s_1, ..., s_l]`.
    pub retrieval_alphas: NodeId,
    /// Retrieval attention restricted to abstract sentences (title dropped,
    /// not renormalized).
    pub sentence_alphas: NodeId,
    pub selection: RationaleSelection,
}

impl HeadOutputs {
    pub fn p_b_values(&self, g: &Graph) -> [f64; 2] {
        let v = g.value(self.p_b).data();
        [v[0], v[1]]
    }

    pub fn p_e_values(&self, g: &Graph) -> [f64; 3] {
        let v = g.value(self.p_e).data();
        [v[0], v[1], v[2]]
    }

    pub fn p_r_values(&self, g: &Graph) -> Vec<[f64; 2]> {
        self.p_r
            .iter()
            .map(|&id| {
                let v = g.value(id).data();
                [v[0], v[1]]
            })
            .collect()
    }
}

/// Runs the encoder and all three heads on one tokenized instance.
///
/// `gold_y_r` supplies gold rationales when scheduled sampling picks them;
/// inference passes `None` with `use_estimated = true`.
pub fn forward_instance(
    g: &mut Graph,
    bound: &BoundParams,
    seq: &TokenizedSequence,
    gold_y_r: Option<&[u8]>,
    use_estimated: bool,
) -> HeadOutputs {
    let encoded: EncodedSequence = encode(g, bound, seq);
    let h_claim = encoded.claim_tokens(g);
    let h_title = encoded.title_tokens(g);
    let h_sentences: Vec<NodeId> = (0..encoded.sentences.len())
        .map(|i| encoded.sentence_tokens(g, i))
        .collect();

    let retrieval = abstract_retrieval_head(g, bound, h_claim, h_title, &h_sentences);
    let rationale = rationale_head(g, bound, &h_sentences);

    let p_r_values: Vec<[f64; 2]> = rationale
        .p_r
        .iter()
        .map(|&id| {
            let v = g.value(id).data();
            [v[0], v[1]]
        })
        .collect();
    let selection = select_rationales(&p_r_values, gold_y_r, use_estimated);
    let selected_reps: Vec<NodeId> = selection
        .indices
        .iter()
        .map(|&i| rationale.h_sentences[i])
        .collect();
    let stance = stance_head(g, bound, h_claim, &selected_reps);

    let p_r1_scalars: Vec<NodeId> = rationale.p_r.iter().map(|&id| g.pick(id, 1)).collect();
    let p_r1 = g.stack_scalars(&p_r1_scalars);
    let unit_count = g.value(retrieval.alphas).len();
    let sentence_alphas = g.slice_vec(retrieval.alphas, 1, unit_count);

    HeadOutputs {
        p_b: retrieval.p_b,
        p_r: rationale.p_r,
        p_e: stance.p_e,
        p_r1,
        retrieval_alphas: retrieval.alphas,
        sentence_alphas,
        selection,
    }
}
