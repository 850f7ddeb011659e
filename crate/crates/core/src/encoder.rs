//! Joint input construction and the contextual word encoder.
//!
//! The input sequence is `[CLS] claim [SEP] title [SEP] s_1 [SEP] ... s_l
//! [SEP]`. When it exceeds the token budget, the longest title/abstract span
//! repeatedly loses its last token (never the claim; ties go to the earliest
//! span) until the sequence fits.
//!
//! The encoder itself is a small contextualizer — token embeddings plus two
//! layers of single-head scaled dot-product self-attention with residual
//! connections and a tanh feed-forward — behind the same interface a
//! pretrained transformer would use.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::Rng;

use crate::compute::{init_uniform, BoundParams, Graph, NodeId, ParameterMap};
use crate::data::Document;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const CLS_ID: usize = 0;
pub const SEP_ID: usize = 1;
pub const UNK_ID: usize = 2;
const RESERVED: [&str; 3] = ["<cls>", "<sep>", "<unk>"];

/// Number of self-attention layers in the contextualizer.
pub const ENCODER_LAYERS: usize = 2;

/// Corpus-built token table. Index 0..3 are the reserved `<cls>`, `<sep>`,
/// `<unk>` entries; unknown tokens map to `<unk>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Vocabulary {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Builds the vocabulary from every title and abstract sentence in the
    /// corpus, sorted for determinism.
    pub fn build(corpus: &[Document]) -> Vocabulary {
        let mut seen: Vec<String> = corpus
            .iter()
            .flat_map(|doc| {
                std::iter::once(doc.title.as_str())
                    .chain(doc.sentences.iter().map(String::as_str))
            })
            .flat_map(tokenize)
            .collect();
        seen.sort();
        seen.dedup();
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(seen);
        Vocabulary::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Restores a vocabulary from its raw token list (checkpoint payload).
    pub fn from_token_list(tokens: Vec<String>) -> Result<Vocabulary> {
        if tokens.len() < RESERVED.len()
            || RESERVED.iter().zip(&tokens).any(|(r, t)| r != t)
        {
            return Err(Error::validation(
                "vocabulary must start with <cls>, <sep>, <unk>",
            ));
        }
        Ok(Vocabulary::from_tokens(tokens))
    }

    /// Tokenizes text into ids; empty tokenizations yield a single `<unk>`.
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = tokenize(text).iter().map(|t| self.id(t)).collect();
        if ids.is_empty() {
            vec![UNK_ID]
        } else {
            ids
        }
    }

    /// Writes one token per line; a token's id is its line number.
    pub fn to_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for token in &self.tokens {
            writeln!(w, "{token}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn from_file(path: &Path) -> Result<Vocabulary> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        Vocabulary::from_token_list(tokens)
    }
}

/// The joint input sequence with half-open token spans for the claim, the
/// title and each abstract sentence. Marker tokens sit outside all spans.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedSequence {
    pub tokens: Vec<usize>,
    pub claim: Range<usize>,
    pub title: Range<usize>,
    pub sentences: Vec<Range<usize>>,
}

impl TokenizedSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }
}

/// Builds the `[CLS] claim [SEP] title [SEP] s_i [SEP]...` sequence,
/// tail-truncating title/abstract spans until it fits `max_len`.
///
/// Errors when even one token per title/sentence cannot fit alongside the
/// whole claim.
pub fn build_input(
    vocab: &Vocabulary,
    claim_text: &str,
    title_text: &str,
    sentences: &[String],
    max_len: usize,
) -> Result<TokenizedSequence> {
    let claim_ids = vocab.encode_text(claim_text);
    let mut spans: Vec<Vec<usize>> = Vec::with_capacity(sentences.len() + 1);
    spans.push(vocab.encode_text(title_text));
    for sentence in sentences {
        spans.push(vocab.encode_text(sentence));
    }
    // [CLS], [SEP] after the claim, [SEP] after the title and each sentence.
    let markers = 2 + spans.len();
    let min_len = claim_ids.len() + markers + spans.len();
    if min_len > max_len {
        return Err(Error::InputTooLong(format!(
            "claim of {} tokens with {} title/abstract spans needs {} tokens, budget is {}",
            claim_ids.len(),
            spans.len(),
            min_len,
            max_len
        )));
    }
    let mut total = claim_ids.len() + markers + spans.iter().map(Vec::len).sum::<usize>();
    while total > max_len {
        let longest = spans
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .expect("at least the title span");
        spans[longest].pop();
        total -= 1;
    }

    let mut tokens = Vec::with_capacity(total);
    tokens.push(CLS_ID);
    let claim_start = tokens.len();
    tokens.extend_from_slice(&claim_ids);
    let claim = claim_start..tokens.len();
    tokens.push(SEP_ID);
    let mut ranges = Vec::with_capacity(spans.len());
    for span in &spans {
        let start = tokens.len();
        tokens.extend_from_slice(span);
        ranges.push(start..tokens.len());
        tokens.push(SEP_ID);
    }
    let title = ranges.remove(0);
    Ok(TokenizedSequence {
        tokens,
        claim,
        title,
        sentences: ranges,
    })
}

/// Per-token representations of one sequence, sliceable by the same spans.
pub struct EncodedSequence {
    pub h_seq: NodeId,
    pub claim: Range<usize>,
    pub title: Range<usize>,
    pub sentences: Vec<Range<usize>>,
}

impl EncodedSequence {
    pub fn claim_tokens(&self, g: &mut Graph) -> NodeId {
        g.slice_rows(self.h_seq, self.claim.start, self.claim.end)
    }

    pub fn title_tokens(&self, g: &mut Graph) -> NodeId {
        g.slice_rows(self.h_seq, self.title.start, self.title.end)
    }

    pub fn sentence_tokens(&self, g: &mut Graph, i: usize) -> NodeId {
        let span = &self.sentences[i];
        g.slice_rows(self.h_seq, span.start, span.end)
    }
}

/// Registers encoder parameters: token embeddings plus per-layer attention
/// and feed-forward weights under `enc.*`.
///
/// A token is a one-hot input, so the embedding table carries fan-in 1 and
/// initializes at unit scale; the affine layers use their input width.
pub fn init_encoder_params(
    params: &mut ParameterMap,
    vocab_size: usize,
    d: usize,
    rng: &mut impl Rng,
) {
    params.insert("enc.embed", init_uniform(vec![vocab_size, d], 1, rng));
    for layer in 0..ENCODER_LAYERS {
        for name in ["wq", "wk", "wv", "wf1", "wf2"] {
            params.insert(
                format!("enc.layer{layer}.{name}"),
                init_uniform(vec![d, d], d, rng),
            );
        }
        for name in ["bq", "bk", "bv", "bf1", "bf2"] {
            params.insert(
                format!("enc.layer{layer}.{name}"),
                init_uniform(vec![d], d, rng),
            );
        }
    }
}

/// Runs the contextualizer, producing one width-`d` vector per token.
///
/// Token ids at or beyond the embedding table map to `<unk>`.
pub fn encode(g: &mut Graph, bound: &BoundParams, seq: &TokenizedSequence) -> EncodedSequence {
    let embed = bound.get("enc.embed");
    let vocab_size = g.value(embed).rows();
    let d = g.value(embed).cols();
    let ids: Vec<usize> = seq
        .tokens
        .iter()
        .map(|&t| if t < vocab_size { t } else { UNK_ID })
        .collect();
    let mut x = g.gather_rows(embed, &ids);
    let scale = 1.0 / (d as f64).sqrt();
    for layer in 0..ENCODER_LAYERS {
        let p = |name: &str| format!("enc.layer{layer}.{name}");
        let q = {
            let (w, b) = (bound.get(&p("wq")), bound.get(&p("bq")));
            g.affine_rows(x, w, b)
        };
        let k = {
            let (w, b) = (bound.get(&p("wk")), bound.get(&p("bk")));
            g.affine_rows(x, w, b)
        };
        let v = {
            let (w, b) = (bound.get(&p("wv")), bound.get(&p("bv")));
            g.affine_rows(x, w, b)
        };
        let scores = g.matmul_nt(q, k);
        let scaled = g.scale_shift(scores, scale, 0.0);
        let attn = g.softmax_rows(scaled);
        let mixed = g.matmul(attn, v);
        x = g.add(x, mixed);
        let ff = {
            let (w1, b1) = (bound.get(&p("wf1")), bound.get(&p("bf1")));
            let (w2, b2) = (bound.get(&p("wf2")), bound.get(&p("bf2")));
            let hidden = g.affine_rows(x, w1, b1);
            let act = g.tanh(hidden);
            g.affine_rows(act, w2, b2)
        };
        x = g.add(x, ff);
    }
    EncodedSequence {
        h_seq: x,
        claim: seq.claim.clone(),
        title: seq.title.clone(),
        sentences: seq.sentences.clone(),
    }
}
