//! Candidate pre-selection: rank abstracts for a claim by embedding cosine
//! similarity and keep the top k.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Claim, Document};
use crate::error::{Error, Result};
use crate::text::tokenize;

/// Text-to-vector interface. Implementations must be deterministic and
/// always return `dim()` values.
pub trait Embedder {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Default embedder: token counts hashed into a fixed number of buckets,
/// L2-normalized. Dependency-free stand-in for a sentence encoder; plug a
/// stronger [`Embedder`] for real retrieval quality.
#[derive(Debug, Clone)]
pub struct HashedBowEmbedder {
    dim: usize,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize) -> HashedBowEmbedder {
        assert!(dim > 0, "embedder dim must be positive");
        HashedBowEmbedder { dim }
    }

    /// Bucket index of a token. FNV-1a keeps this stable across runs and
    /// platforms.
    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dim as u64) as usize
    }
}

impl Default for HashedBowEmbedder {
    fn default() -> HashedBowEmbedder {
        HashedBowEmbedder::new(4096)
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for HashedBowEmbedder {
    fn name(&self) -> &str {
        "hashed-bow"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in tokenize(text) {
            v[self.bucket(&token)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "cosine length mismatch");
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot / (nu.sqrt() * nv.sqrt())
}

/// Candidates for one claim, ranked by non-increasing score.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    pub claim_id: u64,
    pub ranked: Vec<(u64, f64)>,
}

impl CandidateList {
    pub fn doc_ids(&self) -> Vec<u64> {
        self.ranked.iter().map(|&(id, _)| id).collect()
    }
}

/// Text a document is embedded from: title concatenated with the abstract.
pub fn document_text(doc: &Document) -> String {
    let mut text = doc.title.clone();
    for s in &doc.sentences {
        text.push(' ');
        text.push_str(s);
    }
    text
}

/// Ranks the corpus against a claim and keeps the top `k` documents.
///
/// Ties break by ascending `doc_id`; fewer than `k` are returned when the
/// corpus is smaller.
pub fn topk_candidates(
    claim: &Claim,
    corpus: &[Document],
    embedder: &dyn Embedder,
    k: usize,
) -> CandidateList {
    assert!(k >= 1, "k must be at least 1");
    let query = embedder.embed(&claim.text);
    let mut scored: Vec<(u64, f64)> = corpus
        .iter()
        .map(|doc| (doc.doc_id, cosine(&query, &embedder.embed(&document_text(doc)))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    CandidateList {
        claim_id: claim.claim_id,
        ranked: scored,
    }
}

#[derive(Serialize, Deserialize)]
struct RawCandidates {
    claim_id: u64,
    doc_ids: Vec<u64>,
    scores: Vec<f64>,
}

/// Writes candidate lists as line-delimited `{claim_id, doc_ids, scores}`.
pub fn save_candidates(path: &Path, lists: &[CandidateList]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for list in lists {
        let raw = RawCandidates {
            claim_id: list.claim_id,
            doc_ids: list.ranked.iter().map(|&(id, _)| id).collect(),
            scores: list.ranked.iter().map(|&(_, s)| s).collect(),
        };
        let json = serde_json::to_string(&raw)
            .map_err(|e| Error::validation(format!("serialization failed: {e}")))?;
        writeln!(writer, "{json}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn load_candidates(path: &Path) -> Result<Vec<CandidateList>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawCandidates = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        if raw.doc_ids.len() != raw.scores.len() {
            return Err(Error::validation(format!(
                "candidate list for claim {} has {} doc_ids but {} scores",
                raw.claim_id,
                raw.doc_ids.len(),
                raw.scores.len()
            )));
        }
        if raw.scores.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::validation(format!(
                "candidate scores for claim {} are not non-increasing",
                raw.claim_id
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        if raw.doc_ids.iter().any(|id| !seen.insert(*id)) {
            return Err(Error::validation(format!(
                "candidate list for claim {} repeats a doc_id",
                raw.claim_id
            )));
        }
        out.push(CandidateList {
            claim_id: raw.claim_id,
            ranked: raw.doc_ids.into_iter().zip(raw.scores).collect(),
        });
    }
    Ok(out)
}
