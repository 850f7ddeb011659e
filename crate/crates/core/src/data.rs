//! Corpus and claim ingestion, and construction of labeled training
//! instances from gold annotations plus retrieved candidates.
//!
//! File formats are line-delimited JSON records:
//!
//! * corpus: `{"doc_id": 1, "title": "...", "abstract": ["...", ...]}`
//! * claims: `{"id": 1, "claim": "...", "evidence": {"<doc_id>":
//!   [{"sentences": [0, 1], "label": "SUPPORT"}]}, "cited_doc_ids": [1]}`
//! * predictions: `{"id": 1, "evidence": {"<doc_id>": {"sentences": [0],
//!   "label": "SUPPORT"}}}`
//!
//! The `label` vocabulary on disk is `SUPPORT` / `CONTRADICT`; `CONTRADICT`
//! maps to [`Stance::Refute`]. Prediction files may additionally carry
//! `NOINFO`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stance of an abstract towards a claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stance {
    Support,
    Refute,
    NoInfo,
}

impl Stance {
    /// Class index used by the stance head (SUPPORT=0, REFUTE=1, NOINFO=2).
    pub fn index(self) -> usize {
        match self {
            Stance::Support => 0,
            Stance::Refute => 1,
            Stance::NoInfo => 2,
        }
    }

    pub fn from_index(index: usize) -> Stance {
        match index {
            0 => Stance::Support,
            1 => Stance::Refute,
            2 => Stance::NoInfo,
            _ => panic!("stance index out of range: {index}"),
        }
    }

    /// On-disk label string.
    pub fn label(self) -> &'static str {
        match self {
            Stance::Support => "SUPPORT",
            Stance::Refute => "CONTRADICT",
            Stance::NoInfo => "NOINFO",
        }
    }

    fn from_gold_label(label: &str) -> Option<Stance> {
        match label {
            "SUPPORT" => Some(Stance::Support),
            "CONTRADICT" => Some(Stance::Refute),
            _ => None,
        }
    }

    fn from_predicted_label(label: &str) -> Option<Stance> {
        match label {
            "NOINFO" => Some(Stance::NoInfo),
            other => Stance::from_gold_label(other),
        }
    }
}

/// A paper: identifier, title, and pre-segmented abstract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: u64,
    pub title: String,
    pub sentences: Vec<String>,
}

/// Gold evidence for one (claim, document) pair: rationale groups plus the
/// stance shared by all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceSet {
    pub rationale_groups: Vec<Vec<usize>>,
    pub stance: Stance,
}

impl EvidenceSet {
    /// Union of all rationale groups as a sorted index list.
    pub fn rationale_sentences(&self) -> BTreeSet<usize> {
        self.rationale_groups.iter().flatten().copied().collect()
    }
}

/// A claim with its gold annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub claim_id: u64,
    pub text: String,
    pub cited_doc_ids: Vec<u64>,
    pub evidence: BTreeMap<u64, EvidenceSet>,
}

/// One (claim, candidate abstract) training example.
///
/// Labels obey: `y_b == false` implies all-zero `y_r` and `y_e == NoInfo`;
/// `y_b == true` implies at least one rationale sentence and a definite
/// stance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledInstance {
    pub claim_id: u64,
    pub doc_id: u64,
    pub y_b: bool,
    pub y_r: Vec<u8>,
    pub y_e: Stance,
}

impl LabeledInstance {
    fn new(claim_id: u64, doc_id: u64, y_b: bool, y_r: Vec<u8>, y_e: Stance) -> LabeledInstance {
        if y_b {
            assert!(
                y_r.contains(&1) && y_e != Stance::NoInfo,
                "relevant instance must carry rationales and a definite stance"
            );
        } else {
            assert!(
                y_r.iter().all(|&v| v == 0) && y_e == Stance::NoInfo,
                "irrelevant instance must carry no rationales and NOINFO"
            );
        }
        LabeledInstance {
            claim_id,
            doc_id,
            y_b,
            y_r,
            y_e,
        }
    }
}

/// Predicted evidence for one abstract, in the prediction-file schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedEvidence {
    pub sentences: Vec<usize>,
    pub stance: Stance,
}

/// One prediction-file row: everything a model reported for a claim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimPrediction {
    pub claim_id: u64,
    pub evidence: BTreeMap<u64, PredictedEvidence>,
}

#[derive(Serialize, Deserialize)]
struct RawDocument {
    doc_id: u64,
    title: String,
    #[serde(rename = "abstract")]
    sentences: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawEvidenceGroup {
    sentences: Vec<usize>,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct RawClaim {
    id: u64,
    claim: String,
    #[serde(default)]
    evidence: BTreeMap<String, Vec<RawEvidenceGroup>>,
    #[serde(default)]
    cited_doc_ids: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawPredictedEvidence {
    sentences: Vec<usize>,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct RawPrediction {
    id: u64,
    evidence: BTreeMap<String, RawPredictedEvidence>,
}

fn read_jsonl<T, F>(path: &Path, mut convert: F) -> Result<Vec<T>>
where
    F: FnMut(&str, usize) -> Result<T>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(convert(&line, idx + 1)?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for row in rows {
        let json = serde_json::to_string(&row)
            .map_err(|e| Error::validation(format!("serialization failed: {e}")))?;
        writeln!(writer, "{json}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Loads a corpus file; one [`Document`] per line, order preserved.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let docs = read_jsonl(path, |line, lineno| {
        let raw: RawDocument = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if raw.sentences.is_empty() {
            return Err(Error::validation(format!(
                "doc_id {} has an empty abstract",
                raw.doc_id
            )));
        }
        if raw.sentences.iter().any(|s| s.is_empty()) {
            return Err(Error::validation(format!(
                "doc_id {} has an empty sentence",
                raw.doc_id
            )));
        }
        Ok(Document {
            doc_id: raw.doc_id,
            title: raw.title,
            sentences: raw.sentences,
        })
    })?;
    let mut seen = BTreeSet::new();
    for doc in &docs {
        if !seen.insert(doc.doc_id) {
            return Err(Error::validation(format!(
                "duplicate doc_id {} in corpus",
                doc.doc_id
            )));
        }
    }
    Ok(docs)
}

/// Writes a corpus back out in the line-delimited schema.
pub fn save_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    write_jsonl(
        path,
        docs.iter().map(|d| RawDocument {
            doc_id: d.doc_id,
            title: d.title.clone(),
            sentences: d.sentences.clone(),
        }),
    )
}

/// Loads a claims file; evidence maps are validated against the schema.
///
/// Document existence and sentence-index bounds are validated later, in
/// [`build_instances`], once a corpus is available.
pub fn load_claims(path: &Path) -> Result<Vec<Claim>> {
    let claims = read_jsonl(path, |line, lineno| {
        let raw: RawClaim = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        convert_claim(raw)
    })?;
    let mut seen = BTreeSet::new();
    for claim in &claims {
        if !seen.insert(claim.claim_id) {
            return Err(Error::validation(format!(
                "duplicate claim id {} in claims file",
                claim.claim_id
            )));
        }
    }
    Ok(claims)
}

fn convert_claim(raw: RawClaim) -> Result<Claim> {
    if raw.claim.is_empty() {
        return Err(Error::validation(format!("claim {} has empty text", raw.id)));
    }
    let mut evidence = BTreeMap::new();
    for (doc_key, groups) in raw.evidence {
        let doc_id: u64 = doc_key.parse().map_err(|_| {
            Error::validation(format!("claim {}: evidence key {doc_key:?} is not a doc id", raw.id))
        })?;
        if groups.is_empty() {
            return Err(Error::validation(format!(
                "claim {}: evidence for doc {doc_id} has no rationale groups",
                raw.id
            )));
        }
        let mut stance = None;
        let mut rationale_groups = Vec::with_capacity(groups.len());
        let mut seen_sentences = BTreeSet::new();
        for group in groups {
            let group_stance = Stance::from_gold_label(&group.label).ok_or_else(|| {
                Error::validation(format!(
                    "claim {}: evidence label {:?} is not SUPPORT or CONTRADICT",
                    raw.id, group.label
                ))
            })?;
            match stance {
                None => stance = Some(group_stance),
                Some(s) if s != group_stance => {
                    return Err(Error::validation(format!(
                        "claim {}: conflicting stance labels for doc {doc_id}",
                        raw.id
                    )))
                }
                Some(_) => {}
            }
            if group.sentences.is_empty() {
                return Err(Error::validation(format!(
                    "claim {}: empty rationale group for doc {doc_id}",
                    raw.id
                )));
            }
            for &s in &group.sentences {
                if !seen_sentences.insert(s) {
                    return Err(Error::validation(format!(
                        "claim {}: rationale groups for doc {doc_id} overlap on sentence {s}",
                        raw.id
                    )));
                }
            }
            rationale_groups.push(group.sentences);
        }
        if !raw.cited_doc_ids.contains(&doc_id) {
            return Err(Error::validation(format!(
                "claim {}: evidence doc {doc_id} missing from cited_doc_ids",
                raw.id
            )));
        }
        evidence.insert(
            doc_id,
            EvidenceSet {
                rationale_groups,
                stance: stance.expect("at least one group"),
            },
        );
    }
    Ok(Claim {
        claim_id: raw.id,
        text: raw.claim,
        cited_doc_ids: raw.cited_doc_ids,
        evidence,
    })
}

/// Writes claims back out in the line-delimited schema.
pub fn save_claims(path: &Path, claims: &[Claim]) -> Result<()> {
    write_jsonl(
        path,
        claims.iter().map(|c| RawClaim {
            id: c.claim_id,
            claim: c.text.clone(),
            evidence: c
                .evidence
                .iter()
                .map(|(doc_id, ev)| {
                    (
                        doc_id.to_string(),
                        ev.rationale_groups
                            .iter()
                            .map(|g| RawEvidenceGroup {
                                sentences: g.clone(),
                                label: ev.stance.label().to_string(),
                            })
                            .collect(),
                    )
                })
                .collect(),
            cited_doc_ids: c.cited_doc_ids.clone(),
        }),
    )
}

/// Loads a prediction file. Unlike gold claims, predicted stances may be
/// `NOINFO`.
pub fn load_predictions(path: &Path) -> Result<Vec<ClaimPrediction>> {
    let preds = read_jsonl(path, |line, lineno| {
        let raw: RawPrediction = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let mut evidence = BTreeMap::new();
        for (doc_key, ev) in raw.evidence {
            let doc_id: u64 = doc_key.parse().map_err(|_| {
                Error::validation(format!(
                    "prediction {}: evidence key {doc_key:?} is not a doc id",
                    raw.id
                ))
            })?;
            let stance = Stance::from_predicted_label(&ev.label).ok_or_else(|| {
                Error::validation(format!(
                    "prediction {}: unknown stance label {:?}",
                    raw.id, ev.label
                ))
            })?;
            evidence.insert(
                doc_id,
                PredictedEvidence {
                    sentences: ev.sentences,
                    stance,
                },
            );
        }
        Ok(ClaimPrediction {
            claim_id: raw.id,
            evidence,
        })
    })?;
    let mut seen = BTreeSet::new();
    for pred in &preds {
        if !seen.insert(pred.claim_id) {
            return Err(Error::validation(format!(
                "duplicate claim id {} in prediction file",
                pred.claim_id
            )));
        }
    }
    Ok(preds)
}

/// Writes predictions in the claims-like schema consumed by `evaluate`.
pub fn save_predictions(path: &Path, predictions: &[ClaimPrediction]) -> Result<()> {
    write_jsonl(
        path,
        predictions.iter().map(|p| RawPrediction {
            id: p.claim_id,
            evidence: p
                .evidence
                .iter()
                .map(|(doc_id, ev)| {
                    (
                        doc_id.to_string(),
                        RawPredictedEvidence {
                            sentences: ev.sentences.clone(),
                            label: ev.stance.label().to_string(),
                        },
                    )
                })
                .collect(),
        }),
    )
}

/// Builds labeled training instances for every claim.
///
/// Each claim yields one instance per document in (gold evidence docs ∪ top
/// candidates), capped at `max(k_tra, |gold docs|)` instances. Gold evidence
/// docs are always included even when the retriever misses them.
pub fn build_instances(
    claims: &[Claim],
    corpus: &[Document],
    candidate_lists: &BTreeMap<u64, Vec<u64>>,
    k_tra: usize,
) -> Result<Vec<LabeledInstance>> {
    let by_id: BTreeMap<u64, &Document> = corpus.iter().map(|d| (d.doc_id, d)).collect();
    let mut instances = Vec::new();
    for claim in claims {
        let cap = k_tra.max(claim.evidence.len());
        let mut chosen: Vec<u64> = Vec::with_capacity(cap);
        for (&doc_id, ev) in &claim.evidence {
            let doc = by_id.get(&doc_id).ok_or_else(|| {
                Error::validation(format!(
                    "claim {}: evidence doc {doc_id} not in corpus",
                    claim.claim_id
                ))
            })?;
            for group in &ev.rationale_groups {
                for &s in group {
                    if s >= doc.sentences.len() {
                        return Err(Error::validation(format!(
                            "claim {}: rationale sentence {s} out of range for doc {doc_id}",
                            claim.claim_id
                        )));
                    }
                }
            }
            chosen.push(doc_id);
        }
        if let Some(candidates) = candidate_lists.get(&claim.claim_id) {
            for &doc_id in candidates {
                if chosen.len() >= cap {
                    break;
                }
                if !by_id.contains_key(&doc_id) {
                    return Err(Error::validation(format!(
                        "claim {}: candidate doc {doc_id} not in corpus",
                        claim.claim_id
                    )));
                }
                if !chosen.contains(&doc_id) {
                    chosen.push(doc_id);
                }
            }
        }
        for doc_id in chosen {
            let doc = by_id[&doc_id];
            let instance = match claim.evidence.get(&doc_id) {
                Some(ev) => {
                    let mut y_r = vec![0u8; doc.sentences.len()];
                    for s in ev.rationale_sentences() {
                        y_r[s] = 1;
                    }
                    LabeledInstance::new(claim.claim_id, doc_id, true, y_r, ev.stance)
                }
                None => LabeledInstance::new(
                    claim.claim_id,
                    doc_id,
                    false,
                    vec![0u8; doc.sentences.len()],
                    Stance::NoInfo,
                ),
            };
            instances.push(instance);
        }
    }
    Ok(instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::TempDir;

    fn write_lines(dir: &TempDir, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    fn doc(doc_id: u64, title: &str, sentences: &[&str]) -> Document {
        Document {
            doc_id,
            title: title.to_string(),
            sentences: sentences.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn load_corpus_two_lines() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "corpus.jsonl",
            &[
                r#"{"doc_id": 1, "title": "A", "abstract": ["s one.", "s two."]}"#,
                r#"{"doc_id": 2, "title": "B", "abstract": ["only."]}"#,
            ],
        );
        let docs = load_corpus(&path).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].sentences.len(), 2);
        assert_eq!(docs[1].sentences.len(), 1);
    }

    #[test]
    fn load_corpus_empty_file() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(&dir, "corpus.jsonl", &[]);
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn load_corpus_missing_doc_id_is_parse_error_at_line_1() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(&dir, "corpus.jsonl", &[r#"{"title": "A", "abstract": ["x"]}"#]);
        match load_corpus(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_corpus_duplicate_doc_id() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "corpus.jsonl",
            &[
                r#"{"doc_id": 1, "title": "A", "abstract": ["x"]}"#,
                r#"{"doc_id": 1, "title": "B", "abstract": ["y"]}"#,
            ],
        );
        assert!(matches!(load_corpus(&path), Err(Error::Validation(_))));
    }

    #[test]
    fn load_corpus_empty_abstract() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(&dir, "corpus.jsonl", &[r#"{"doc_id": 1, "title": "A", "abstract": []}"#]);
        assert!(matches!(load_corpus(&path), Err(Error::Validation(_))));
    }

    #[test]
    fn load_claims_with_support_evidence() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "claims.jsonl",
            &[
                r#"{"id": 3, "claim": "c", "evidence": {"7": [{"sentences": [0, 2], "label": "SUPPORT"}]}, "cited_doc_ids": [7]}"#,
            ],
        );
        let claims = load_claims(&path).unwrap();
        assert_eq!(claims.len(), 1);
        let ev = &claims[0].evidence[&7];
        assert_eq!(ev.stance, Stance::Support);
        assert_eq!(ev.rationale_groups, vec![vec![0, 2]]);
    }

    #[test]
    fn load_claims_empty_evidence_is_noinfo_claim() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "claims.jsonl",
            &[r#"{"id": 4, "claim": "c", "evidence": {}, "cited_doc_ids": [9]}"#],
        );
        let claims = load_claims(&path).unwrap();
        assert!(claims[0].evidence.is_empty());
    }

    #[test]
    fn load_claims_rejects_unknown_stance() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "claims.jsonl",
            &[
                r#"{"id": 4, "claim": "c", "evidence": {"7": [{"sentences": [0], "label": "MAYBE"}]}, "cited_doc_ids": [7]}"#,
            ],
        );
        assert!(matches!(load_claims(&path), Err(Error::Validation(_))));
    }

    #[test]
    fn load_claims_rejects_evidence_outside_cited() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "claims.jsonl",
            &[
                r#"{"id": 4, "claim": "c", "evidence": {"7": [{"sentences": [0], "label": "SUPPORT"}]}, "cited_doc_ids": [8]}"#,
            ],
        );
        assert!(matches!(load_claims(&path), Err(Error::Validation(_))));
    }

    #[test]
    fn build_instances_labels_gold_and_negative() {
        let corpus = vec![
            doc(7, "t7", &["a", "b", "c", "d"]),
            doc(9, "t9", &["x", "y"]),
        ];
        let claim = Claim {
            claim_id: 1,
            text: "c".into(),
            cited_doc_ids: vec![7],
            evidence: BTreeMap::from([(
                7,
                EvidenceSet {
                    rationale_groups: vec![vec![1, 2]],
                    stance: Stance::Support,
                },
            )]),
        };
        let candidates = BTreeMap::from([(1, vec![7, 9])]);
        let instances = build_instances(&[claim], &corpus, &candidates, 12).unwrap();
        assert_eq!(instances.len(), 2);
        let pos = instances.iter().find(|i| i.doc_id == 7).unwrap();
        assert!(pos.y_b);
        assert_eq!(pos.y_r, vec![0, 1, 1, 0]);
        assert_eq!(pos.y_e, Stance::Support);
        let neg = instances.iter().find(|i| i.doc_id == 9).unwrap();
        assert!(!neg.y_b);
        assert_eq!(neg.y_r, vec![0, 0]);
        assert_eq!(neg.y_e, Stance::NoInfo);
    }

    #[test]
    fn build_instances_noinfo_claim_single_negative() {
        let corpus = vec![doc(3, "t", &["a"])];
        let claim = Claim {
            claim_id: 1,
            text: "c".into(),
            cited_doc_ids: vec![3],
            evidence: BTreeMap::new(),
        };
        let candidates = BTreeMap::from([(1, vec![3])]);
        let instances = build_instances(&[claim], &corpus, &candidates, 12).unwrap();
        assert_eq!(instances.len(), 1);
        assert!(!instances[0].y_b);
        assert_eq!(instances[0].y_e, Stance::NoInfo);
    }

    #[test]
    fn build_instances_capped_by_corpus_size() {
        let corpus: Vec<Document> = (0..5).map(|i| doc(i, "t", &["a"])).collect();
        let claim = Claim {
            claim_id: 1,
            text: "c".into(),
            cited_doc_ids: vec![],
            evidence: BTreeMap::new(),
        };
        let candidates = BTreeMap::from([(1, (0..5).collect::<Vec<u64>>())]);
        let instances = build_instances(&[claim], &corpus, &candidates, 12).unwrap();
        assert_eq!(instances.len(), 5);
    }

    #[test]
    fn build_instances_always_includes_gold_docs() {
        let corpus = vec![doc(1, "t", &["a"]), doc(2, "t", &["b"])];
        let claim = Claim {
            claim_id: 1,
            text: "c".into(),
            cited_doc_ids: vec![2],
            evidence: BTreeMap::from([(
                2,
                EvidenceSet {
                    rationale_groups: vec![vec![0]],
                    stance: Stance::Refute,
                },
            )]),
        };
        // Retriever ranked only the wrong doc, with k_tra=1.
        let candidates = BTreeMap::from([(1, vec![1])]);
        let instances = build_instances(&[claim], &corpus, &candidates, 1).unwrap();
        assert_eq!(instances.len(), 1);
        assert_eq!(instances[0].doc_id, 2);
        assert!(instances[0].y_b);
    }

    #[test]
    fn build_instances_rejects_unknown_candidate() {
        let corpus = vec![doc(1, "t", &["a"])];
        let claim = Claim {
            claim_id: 1,
            text: "c".into(),
            cited_doc_ids: vec![],
            evidence: BTreeMap::new(),
        };
        let candidates = BTreeMap::from([(1, vec![99])]);
        assert!(matches!(
            build_instances(&[claim], &corpus, &candidates, 12),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn build_instances_rejects_out_of_range_rationale() {
        let corpus = vec![doc(1, "t", &["a"])];
        let claim = Claim {
            claim_id: 1,
            text: "c".into(),
            cited_doc_ids: vec![1],
            evidence: BTreeMap::from([(
                1,
                EvidenceSet {
                    rationale_groups: vec![vec![5]],
                    stance: Stance::Support,
                },
            )]),
        };
        assert!(matches!(
            build_instances(&[claim], &corpus, &BTreeMap::new(), 12),
            Err(Error::Validation(_))
        ));
    }

    prop_compose! {
        fn arb_document(doc_id: u64)(
            title in "[a-z ]{0,20}",
            sentences in prop::collection::vec("[a-z ]{1,30}", 1..5),
        ) -> Document {
            Document { doc_id, title, sentences }
        }
    }

    proptest! {
        #[test]
        fn corpus_round_trip(ids in prop::collection::btree_set(0u64..1000, 0..8)) {
            let dir = TempDir::new().unwrap();
            let mut docs = Vec::new();
            for (i, id) in ids.iter().enumerate() {
                docs.push(Document {
                    doc_id: *id,
                    title: format!("title {i}"),
                    sentences: vec![format!("sentence {i}"), "tail.".to_string()],
                });
            }
            let path = dir.path().join("corpus.jsonl");
            save_corpus(&path, &docs).unwrap();
            prop_assert_eq!(load_corpus(&path).unwrap(), docs);
        }

        #[test]
        fn claims_round_trip(
            n in 0usize..6,
            stance_refute in prop::collection::vec(any::<bool>(), 6),
        ) {
            let dir = TempDir::new().unwrap();
            let mut claims = Vec::new();
            #[allow(clippy::needless_range_loop)]
            for i in 0..n {
                let evidence = if i.is_multiple_of(2) {
                    BTreeMap::from([(i as u64 + 100, EvidenceSet {
                        rationale_groups: vec![vec![0], vec![2, 3]],
                        stance: if stance_refute[i] { Stance::Refute } else { Stance::Support },
                    })])
                } else {
                    BTreeMap::new()
                };
                claims.push(Claim {
                    claim_id: i as u64,
                    text: format!("claim {i}"),
                    cited_doc_ids: vec![i as u64 + 100, i as u64 + 200],
                    evidence,
                });
            }
            let path = dir.path().join("claims.jsonl");
            save_claims(&path, &claims).unwrap();
            prop_assert_eq!(load_claims(&path).unwrap(), claims);
        }
    }

    #[test]
    fn predictions_round_trip_with_noinfo() {
        let dir = TempDir::new().unwrap();
        let preds = vec![ClaimPrediction {
            claim_id: 5,
            evidence: BTreeMap::from([
                (
                    7,
                    PredictedEvidence {
                        sentences: vec![0, 1],
                        stance: Stance::Support,
                    },
                ),
                (
                    9,
                    PredictedEvidence {
                        sentences: vec![],
                        stance: Stance::NoInfo,
                    },
                ),
            ]),
        }];
        let path = dir.path().join("preds.jsonl");
        save_predictions(&path, &preds).unwrap();
        assert_eq!(load_predictions(&path).unwrap(), preds);
    }
}
