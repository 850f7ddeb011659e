//! Joint training over the three heads with scheduled sampling, plus
//! checkpointing and end-to-end inference.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compute::{Gradients, Graph, ParameterMap, Tensor};
use crate::data::{Claim, ClaimPrediction, Document, LabeledInstance, PredictedEvidence, Stance};
use crate::encoder::{build_input, init_encoder_params, TokenizedSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::heads::{forward_instance, init_head_params, sample_probability, HeadOutputs};
use crate::loss::{
    cross_entropy, joint_loss, rationale_loss, rr_loss, JointLossNodes, LossBreakdown, LossWeights,
};
use crate::retrieval::{topk_candidates, Embedder};

/// Every knob of a training run. Defaults follow the reference
/// configuration: learning rates 1e-5 (encoder) and 5e-6 (heads), batch
/// size 1, no dropout, 12 training and 30 inference candidates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub lr1: f64,
    pub lr2: f64,
    pub epochs: usize,
    pub k_tra: usize,
    pub k_ret: usize,
    pub max_len: usize,
    pub d: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            weights: LossWeights::default(),
            lr1: 1e-5,
            lr2: 5e-6,
            epochs: 20,
            k_tra: 12,
            k_ret: 30,
            max_len: 256,
            d: 64,
            seed: 42,
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"CVCK";
const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model: parameters, configuration and vocabulary. Reloading
/// reproduces forward outputs bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub params: ParameterMap,
    pub config: TrainConfig,
    pub vocab: Vocabulary,
}

impl ModelCheckpoint {
    /// Fresh model with uniformly initialized parameters, seeded from the
    /// config.
    pub fn init(vocab: Vocabulary, config: TrainConfig) -> ModelCheckpoint {
        let mut params = ParameterMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        init_encoder_params(&mut params, vocab.len(), config.d, &mut rng);
        init_head_params(&mut params, config.d, &mut rng);
        ModelCheckpoint {
            params,
            config,
            vocab,
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Checkpoint(format!("write failed: {e}"));
        w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
        let config = serde_json::to_vec(&self.config)
            .map_err(|e| Error::Checkpoint(format!("config serialization failed: {e}")))?;
        w.write_all(&(config.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&config).map_err(io_err)?;
        w.write_all(&(self.vocab.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        for token in self.vocab.tokens() {
            let bytes = token.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io_err)?;
            w.write_all(bytes).map_err(io_err)?;
        }
        self.params.write_to(w).map_err(io_err)
    }

    pub fn read_from(r: &mut impl Read) -> Result<ModelCheckpoint> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let config_len = read_u32(r)? as usize;
        let mut config_bytes = vec![0u8; config_len];
        r.read_exact(&mut config_bytes)
            .map_err(|_| bad("truncated config"))?;
        let config: TrainConfig = serde_json::from_slice(&config_bytes)
            .map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
        let vocab_len = read_u32(r)? as usize;
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = read_u32(r)? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes).map_err(|_| bad("truncated vocab"))?;
            tokens.push(String::from_utf8(bytes).map_err(|_| bad("vocab token not utf-8"))?);
        }
        let vocab = Vocabulary::from_token_list(tokens)?;
        let params = ParameterMap::read_from(r)?;
        Ok(ModelCheckpoint {
            params,
            config,
            vocab,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelCheckpoint> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        ModelCheckpoint::read_from(&mut BufReader::new(file))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint("truncated integer".to_string()))?;
    Ok(u32::from_le_bytes(buf))
}

/// Adaptive-moment optimizer with two learning-rate groups: `enc.*`
/// parameters train at `lr1`, everything else at `lr2`.
pub struct Adam {
    lr1: f64,
    lr2: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr1: f64, lr2: f64) -> Adam {
        Adam {
            lr1,
            lr2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    fn learning_rate(&self, path: &str) -> f64 {
        if path.starts_with("enc.") {
            self.lr1
        } else {
            self.lr2
        }
    }

    /// Applies one update. Parameters without a gradient entry stay
    /// untouched.
    pub fn step(&mut self, params: &mut ParameterMap, grads: &BTreeMap<String, Tensor>) {
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        for (path, grad) in grads {
            let lr = self.learning_rate(path);
            let current = params.get(path);
            assert_eq!(current.shape(), grad.shape(), "gradient shape for {path}");
            let (m, v) = self
                .moments
                .entry(path.clone())
                .or_insert_with(|| (vec![0.0; grad.len()], vec![0.0; grad.len()]));
            let mut updated = current.data().to_vec();
            for i in 0..grad.len() {
                let gi = grad.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                updated[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            params.set(path, Tensor::from_raw(grad.shape().to_vec(), updated));
        }
    }
}

/// One instance's loss nodes plus head outputs, ready for backward.
pub fn instance_loss(
    g: &mut Graph,
    bound: &crate::compute::BoundParams,
    seq: &TokenizedSequence,
    instance: &LabeledInstance,
    use_estimated: bool,
    weights: &LossWeights,
) -> (JointLossNodes, HeadOutputs) {
    let outputs = forward_instance(g, bound, seq, Some(&instance.y_r), use_estimated);
    let l_ret = cross_entropy(g, outputs.p_b, instance.y_b as usize);
    let l_rat = rationale_loss(g, &outputs.p_r, &instance.y_r);
    let l_sta = cross_entropy(g, outputs.p_e, instance.y_e.index());
    let l_rr = rr_loss(g, outputs.sentence_alphas, outputs.p_r1);
    let nodes = joint_loss(g, l_ret, l_rat, l_sta, l_rr, weights);
    (nodes, outputs)
}

/// Collects parameter gradients by path after a backward pass.
pub fn parameter_gradients(g: &Graph, params: &ParameterMap, grads: &Gradients) -> BTreeMap<String, Tensor> {
    let mut out = BTreeMap::new();
    for path in params.paths() {
        if let Some(id) = g.param_node(path) {
            if let Some(grad) = grads.get(id) {
                out.insert(path.clone(), grad.clone());
            }
        }
    }
    out
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` keyed by (seed, claim, doc, epoch): the
/// scheduled-sampling decision for an instance does not depend on shuffle
/// order.
fn instance_draw(seed: u64, claim_id: u64, doc_id: u64, epoch: usize) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ claim_id);
    h = splitmix64(h ^ doc_id.rotate_left(17));
    h = splitmix64(h ^ (epoch as u64).rotate_left(43));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// A trained model plus its per-epoch training record.
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    /// Mean loss breakdown per epoch, in epoch order.
    pub epoch_losses: Vec<LossBreakdown>,
    /// Fraction of instances that used estimated rationales, per epoch.
    pub estimated_fraction: Vec<f64>,
}

struct Prepared {
    instance: LabeledInstance,
    seq: TokenizedSequence,
}

fn prepare_instances(
    instances: &[LabeledInstance],
    claims: &[Claim],
    corpus: &[Document],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<Prepared>> {
    let claim_by_id: BTreeMap<u64, &Claim> = claims.iter().map(|c| (c.claim_id, c)).collect();
    let doc_by_id: BTreeMap<u64, &Document> = corpus.iter().map(|d| (d.doc_id, d)).collect();
    instances
        .iter()
        .map(|instance| {
            let claim = claim_by_id.get(&instance.claim_id).ok_or_else(|| {
                Error::validation(format!("instance references unknown claim {}", instance.claim_id))
            })?;
            let doc = doc_by_id.get(&instance.doc_id).ok_or_else(|| {
                Error::validation(format!("instance references unknown doc {}", instance.doc_id))
            })?;
            let seq = build_input(vocab, &claim.text, &doc.title, &doc.sentences, max_len)?;
            Ok(Prepared {
                instance: instance.clone(),
                seq,
            })
        })
        .collect()
}

/// Trains the joint model; deterministic given the config seed.
pub fn train(
    instances: &[LabeledInstance],
    claims: &[Claim],
    corpus: &[Document],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(instances, claims, corpus, config, |_, _| {})
}

/// [`train`], invoking `progress(epoch, mean_losses)` after every epoch.
pub fn train_with_progress(
    instances: &[LabeledInstance],
    claims: &[Claim],
    corpus: &[Document],
    config: &TrainConfig,
    mut progress: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainOutcome> {
    if instances.is_empty() {
        return Err(Error::validation("no training instances"));
    }
    config.weights.validate();
    let vocab = Vocabulary::build(corpus);
    let mut checkpoint = ModelCheckpoint::init(vocab, config.clone());
    let prepared = prepare_instances(instances, claims, corpus, &checkpoint.vocab, config.max_len)?;

    let mut optimizer = Adam::new(config.lr1, config.lr2);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut estimated_fraction = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..prepared.len()).collect();

    for epoch in 1..=config.epochs {
        let p_sample = sample_probability(epoch, config.epochs);
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ (epoch as u64)));
        order.shuffle(&mut shuffle_rng);

        let mut epoch_sum = LossBreakdown::default();
        let mut estimated = 0usize;
        for &idx in &order {
            let item = &prepared[idx];
            let use_estimated = instance_draw(
                config.seed,
                item.instance.claim_id,
                item.instance.doc_id,
                epoch,
            ) < p_sample;
            estimated += use_estimated as usize;

            let mut g = Graph::new();
            let bound = g.bind(&checkpoint.params);
            let (nodes, _) = instance_loss(
                &mut g,
                &bound,
                &item.seq,
                &item.instance,
                use_estimated,
                &config.weights,
            );
            let breakdown = LossBreakdown::from_graph(&g, &nodes);
            if !breakdown.l_total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    claim_id: item.instance.claim_id,
                    doc_id: item.instance.doc_id,
                    value: breakdown.l_total,
                });
            }
            let grads = g.backward(nodes.total);
            let by_path = parameter_gradients(&g, &checkpoint.params, &grads);
            optimizer.step(&mut checkpoint.params, &by_path);
            epoch_sum.add_assign(&breakdown);
        }
        let mean = epoch_sum.scaled(1.0 / prepared.len() as f64);
        progress(epoch, &mean);
        epoch_losses.push(mean);
        estimated_fraction.push(estimated as f64 / prepared.len() as f64);
    }

    Ok(TrainOutcome {
        checkpoint,
        epoch_losses,
        estimated_fraction,
    })
}

/// What the model said about one candidate abstract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractPrediction {
    pub doc_id: u64,
    /// Relevance-head verdict `p_b1 > p_b0`.
    pub relevant: bool,
    /// Estimated rationale sentences before the stance fallback; may be
    /// empty.
    pub rationale_indices: Vec<usize>,
    pub stance: Stance,
}

impl AbstractPrediction {
    /// The inference gate: an abstract is reported when it is relevant and
    /// its stance is definite.
    pub fn reported(&self) -> bool {
        self.relevant && self.stance != Stance::NoInfo
    }
}

/// End-to-end prediction for one claim over its retrieved candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub claim_id: u64,
    pub abstracts: Vec<AbstractPrediction>,
}

impl Prediction {
    pub fn reported(&self) -> impl Iterator<Item = &AbstractPrediction> {
        self.abstracts.iter().filter(|a| a.reported())
    }

    /// Converts to the prediction-file row consumed by evaluation.
    pub fn to_claim_prediction(&self) -> ClaimPrediction {
        ClaimPrediction {
            claim_id: self.claim_id,
            evidence: self
                .reported()
                .map(|a| {
                    (
                        a.doc_id,
                        PredictedEvidence {
                            sentences: a.rationale_indices.clone(),
                            stance: a.stance,
                        },
                    )
                })
                .collect(),
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Runs retrieval plus all heads on a claim and applies the reporting gate.
pub fn predict(
    checkpoint: &ModelCheckpoint,
    claim: &Claim,
    corpus: &[Document],
    embedder: &dyn Embedder,
    k_ret: usize,
) -> Result<Prediction> {
    let doc_by_id: BTreeMap<u64, &Document> = corpus.iter().map(|d| (d.doc_id, d)).collect();
    let mut abstracts = Vec::new();
    if !corpus.is_empty() {
        let candidates = topk_candidates(claim, corpus, embedder, k_ret);
        for (doc_id, _) in candidates.ranked {
            let doc = doc_by_id[&doc_id];
            let seq = build_input(
                &checkpoint.vocab,
                &claim.text,
                &doc.title,
                &doc.sentences,
                checkpoint.config.max_len,
            )?;
            let mut g = Graph::new();
            let bound = g.bind(&checkpoint.params);
            let outputs = forward_instance(&mut g, &bound, &seq, None, true);
            let p_b = outputs.p_b_values(&g);
            let p_e = outputs.p_e_values(&g);
            abstracts.push(AbstractPrediction {
                doc_id,
                relevant: p_b[1] > p_b[0],
                rationale_indices: outputs.selection.pre_fallback().to_vec(),
                stance: Stance::from_index(argmax(&p_e)),
            });
        }
    }
    Ok(Prediction {
        claim_id: claim.claim_id,
        abstracts,
    })
}

/// Convenience: predictions for many claims, as file rows.
pub fn predict_all(
    checkpoint: &ModelCheckpoint,
    claims: &[Claim],
    corpus: &[Document],
    embedder: &dyn Embedder,
    k_ret: usize,
) -> Result<Vec<ClaimPrediction>> {
    claims
        .iter()
        .map(|claim| predict(checkpoint, claim, corpus, embedder, k_ret).map(|p| p.to_claim_prediction()))
        .collect()
}
