//! Shared fixtures for integration tests: the vocabulary-separable tiny
//! benchmark, a brute-force evaluation scorer, and random gold/prediction
//! generators.

#![allow(dead_code)]

use std::collections::BTreeMap;

use claimverify::data::{Claim, ClaimPrediction, Document, EvidenceSet, PredictedEvidence, Stance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic 16-claim / 40-doc benchmark.
///
/// Seven topic clusters of three identical documents each (docs `3c..3c+3`)
/// carry a directional finding: clusters 0..4 "rises", 4..7 "falls". Each
/// cluster gets two claims, one asserting "rises" and one "falls", so every
/// document SUPPORTs one claim and REFUTEs the other. Docs 21..40 report no
/// direction; two of them are cited by the two NOINFO claims. The rationale
/// is always the first sentence, every claim token appears in the corpus,
/// and topic tokens never cross cluster boundaries.
pub fn tiny_benchmark() -> (Vec<Document>, Vec<Claim>) {
    let mut corpus = Vec::new();
    for j in 0..40u64 {
        let (topic, outcome, polarity) = if j < 21 {
            let cluster = j / 3;
            let polarity = if cluster < 4 { "rises" } else { "falls" };
            (
                format!("topic{cluster}"),
                format!("outcome{cluster}"),
                Some(polarity),
            )
        } else {
            let cluster = 7 + (j - 21);
            (format!("topic{cluster}"), format!("outcome{cluster}"), None)
        };
        let title = format!("{topic} {outcome}");
        let finding = match polarity {
            Some(p) => format!("{topic} {outcome} {p}."),
            None => format!("{topic} {outcome} unclear."),
        };
        corpus.push(Document {
            doc_id: j,
            title,
            sentences: vec![finding, "filler words linger.".to_string()],
        });
    }

    let mut claims = Vec::new();
    for i in 0..16u64 {
        if i < 14 {
            let cluster = i / 2;
            let assertion = if i % 2 == 0 { "rises" } else { "falls" };
            let cluster_polarity = if cluster < 4 { "rises" } else { "falls" };
            let stance = if assertion == cluster_polarity {
                Stance::Support
            } else {
                Stance::Refute
            };
            let docs: Vec<u64> = (3 * cluster..3 * cluster + 3).collect();
            let evidence = docs
                .iter()
                .map(|&d| {
                    (
                        d,
                        EvidenceSet {
                            rationale_groups: vec![vec![0]],
                            stance,
                        },
                    )
                })
                .collect();
            claims.push(Claim {
                claim_id: i,
                text: format!("topic{cluster} outcome{cluster} {assertion}"),
                cited_doc_ids: docs,
                evidence,
            });
        } else {
            // NOINFO claims cite directionless docs (topics 7 and 8).
            let topic = 7 + (i - 14);
            let doc = 21 + (i - 14);
            claims.push(Claim {
                claim_id: i,
                text: format!("topic{topic} outcome{topic} rises"),
                cited_doc_ids: vec![doc],
                evidence: BTreeMap::new(),
            });
        }
    }
    (corpus, claims)
}

/// Candidate lists for [`tiny_benchmark`] training: each evidence claim
/// pairs with its gold cluster, six rotating directionless documents and one
/// rotating cross-cluster document; NOINFO claims pair with their cited
/// document, two fixed cross-cluster documents and three directionless
/// documents. The mix keeps every head's classes within a small frequency
/// ratio.
pub fn tiny_benchmark_candidates(claims: &[Claim]) -> BTreeMap<u64, Vec<u64>> {
    claims
        .iter()
        .map(|c| {
            let i = c.claim_id;
            let mut docs: Vec<u64> = c.evidence.keys().copied().collect();
            if i < 14 {
                for k in 0..6 {
                    docs.push(21 + (2 * i + k) % 19);
                }
                let cluster = i / 2;
                // same-polarity clusters are the hard retrieval negatives,
                // opposite-polarity ones the easy contrast
                if cluster < 4 {
                    docs.push(3 * ((cluster + 1) % 4));
                    docs.push(3 * ((cluster + 2) % 4) + 1);
                    docs.push(3 * (4 + cluster % 3) + 2);
                    docs.push(3 * (4 + (cluster + 1) % 3));
                } else {
                    docs.push(3 * (4 + (cluster - 4 + 1) % 3));
                    docs.push(3 * (4 + (cluster - 4 + 2) % 3) + 1);
                    docs.push(3 * (cluster % 4) + 2);
                    docs.push(3 * ((cluster + 1) % 4));
                }
            } else {
                docs.push(0);
                docs.push(1);
                for k in 0..3 {
                    docs.push(23 + (3 * i + k) % 17);
                }
            }
            docs.sort_unstable();
            docs.dedup();
            (i, docs)
        })
        .collect()
}

/// Raw counts produced by the brute-force scorer.
#[derive(Debug, PartialEq, Eq)]
pub struct OracleCounts {
    pub tp: usize,
    pub predicted: usize,
    pub gold: usize,
}

/// Brute-force sentence-level scorer: plain nested loops over claims, docs,
/// sentences and groups, applying the rules directly. `require_label`
/// switches Selection-Only to Selection+Label.
pub fn oracle_sentence_counts(
    predictions: &[ClaimPrediction],
    gold: &[Claim],
    require_label: bool,
) -> OracleCounts {
    let mut gold_total = 0;
    for claim in gold {
        for ev in claim.evidence.values() {
            for group in &ev.rationale_groups {
                gold_total += group.len();
            }
        }
    }

    let mut predicted = 0;
    let mut tp = 0;
    for row in predictions {
        for claim in gold {
            if claim.claim_id != row.claim_id {
                continue;
            }
            for (doc_id, pred_ev) in &row.evidence {
                let mut uniq: Vec<usize> = Vec::new();
                for &s in &pred_ev.sentences {
                    if !uniq.contains(&s) {
                        uniq.push(s);
                    }
                }
                predicted += uniq.len();
                for &s in &uniq {
                    let Some(gold_ev) = claim.evidence.get(doc_id) else {
                        continue;
                    };
                    let stance_ok = if require_label {
                        pred_ev.stance == gold_ev.stance
                    } else {
                        pred_ev.stance != Stance::NoInfo
                    };
                    if !stance_ok {
                        continue;
                    }
                    let mut correct = false;
                    for group in &gold_ev.rationale_groups {
                        if !group.contains(&s) {
                            continue;
                        }
                        let mut whole_group_predicted = true;
                        for member in group {
                            if !uniq.contains(member) {
                                whole_group_predicted = false;
                            }
                        }
                        if whole_group_predicted {
                            correct = true;
                        }
                    }
                    if correct {
                        tp += 1;
                    }
                }
            }
        }
    }
    OracleCounts {
        tp,
        predicted,
        gold: gold_total,
    }
}

/// Brute-force abstract-level scorer. `require_rationale` switches
/// Label-Only to Label+Rationale.
pub fn oracle_abstract_counts(
    predictions: &[ClaimPrediction],
    gold: &[Claim],
    require_rationale: bool,
) -> OracleCounts {
    let mut gold_total = 0;
    for claim in gold {
        gold_total += claim.evidence.len();
    }

    let mut predicted = 0;
    let mut tp = 0;
    for row in predictions {
        for claim in gold {
            if claim.claim_id != row.claim_id {
                continue;
            }
            for (doc_id, pred_ev) in &row.evidence {
                predicted += 1;
                let Some(gold_ev) = claim.evidence.get(doc_id) else {
                    continue;
                };
                if pred_ev.stance != gold_ev.stance {
                    continue;
                }
                if require_rationale {
                    let mut contains_a_group = false;
                    for group in &gold_ev.rationale_groups {
                        let mut all_in = true;
                        for member in group {
                            if !pred_ev.sentences.contains(member) {
                                all_in = false;
                            }
                        }
                        if all_in {
                            contains_a_group = true;
                        }
                    }
                    if !contains_a_group {
                        continue;
                    }
                }
                tp += 1;
            }
        }
    }
    OracleCounts {
        tp,
        predicted,
        gold: gold_total,
    }
}

/// Feature coverage of one random gold/prediction pair.
#[derive(Default)]
pub struct SyntheticCoverage {
    pub empty_prediction: bool,
    pub noinfo_stance: bool,
    pub partial_group: bool,
    pub superset_rationales: bool,
}

/// Random gold/prediction pair exercising every scoring edge: NOINFO
/// stances, empty predictions, partially predicted groups and supersets.
pub fn random_eval_case(seed: u64) -> (Vec<Claim>, Vec<ClaimPrediction>, SyntheticCoverage) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coverage = SyntheticCoverage::default();
    let n_claims = rng.gen_range(1..7);
    let n_docs = rng.gen_range(2..9) as u64;
    let doc_sentences: Vec<usize> = (0..n_docs).map(|_| rng.gen_range(2..9)).collect();

    let mut gold = Vec::new();
    for claim_id in 0..n_claims {
        let mut evidence = BTreeMap::new();
        let n_ev = rng.gen_range(0..3).min(n_docs);
        let mut cited = Vec::new();
        for _ in 0..n_ev {
            let doc = rng.gen_range(0..n_docs);
            if evidence.contains_key(&doc) {
                continue;
            }
            let sentence_count = doc_sentences[doc as usize];
            let mut available: Vec<usize> = (0..sentence_count).collect();
            let n_groups = rng.gen_range(1..3);
            let mut groups = Vec::new();
            for _ in 0..n_groups {
                if available.is_empty() {
                    break;
                }
                let size = rng.gen_range(1..=2.min(available.len()));
                let mut group = Vec::new();
                for _ in 0..size {
                    let pick = rng.gen_range(0..available.len());
                    group.push(available.swap_remove(pick));
                }
                group.sort_unstable();
                groups.push(group);
            }
            if groups.is_empty() {
                continue;
            }
            cited.push(doc);
            evidence.insert(
                doc,
                EvidenceSet {
                    rationale_groups: groups,
                    stance: if rng.gen_bool(0.5) {
                        Stance::Support
                    } else {
                        Stance::Refute
                    },
                },
            );
        }
        gold.push(Claim {
            claim_id,
            text: format!("claim {claim_id}"),
            cited_doc_ids: cited,
            evidence,
        });
    }

    let mut predictions = Vec::new();
    for claim in &gold {
        if rng.gen_bool(0.2) {
            coverage.empty_prediction = true;
            predictions.push(ClaimPrediction {
                claim_id: claim.claim_id,
                evidence: BTreeMap::new(),
            });
            continue;
        }
        let mut evidence = BTreeMap::new();
        let n_pred = rng.gen_range(0..4).min(n_docs);
        for _ in 0..n_pred {
            let doc = rng.gen_range(0..n_docs);
            if evidence.contains_key(&doc) {
                continue;
            }
            let sentence_count = doc_sentences[doc as usize];
            let mut sentences = Vec::new();
            match claim.evidence.get(&doc) {
                Some(gold_ev) if rng.gen_bool(0.6) => {
                    // Start from gold sentences, then mutilate or extend.
                    for group in &gold_ev.rationale_groups {
                        for &s in group {
                            sentences.push(s);
                        }
                    }
                    if rng.gen_bool(0.4) && sentences.len() > 1 {
                        sentences.truncate(sentences.len() / 2);
                        coverage.partial_group = true;
                    } else if rng.gen_bool(0.5) {
                        for s in 0..sentence_count {
                            if !sentences.contains(&s) {
                                sentences.push(s);
                                coverage.superset_rationales = true;
                                break;
                            }
                        }
                    }
                }
                _ => {
                    for s in 0..sentence_count {
                        if rng.gen_bool(0.3) {
                            sentences.push(s);
                        }
                    }
                }
            }
            sentences.sort_unstable();
            sentences.dedup();
            let stance = match rng.gen_range(0..4) {
                0 => {
                    coverage.noinfo_stance = true;
                    Stance::NoInfo
                }
                1 => Stance::Refute,
                _ => Stance::Support,
            };
            evidence.insert(doc, PredictedEvidence { sentences, stance });
        }
        predictions.push(ClaimPrediction {
            claim_id: claim.claim_id,
            evidence,
        });
    }
    (gold, predictions, coverage)
}

/// Writes the benchmark (or any corpus/claims pair) into a directory and
/// returns the two paths.
pub fn write_dataset(
    dir: &std::path::Path,
    corpus: &[Document],
    claims: &[Claim],
) -> (std::path::PathBuf, std::path::PathBuf) {
    let corpus_path = dir.join("corpus.jsonl");
    let claims_path = dir.join("claims.jsonl");
    claimverify::data::save_corpus(&corpus_path, corpus).unwrap();
    claimverify::data::save_claims(&claims_path, claims).unwrap();
    (corpus_path, claims_path)
}
