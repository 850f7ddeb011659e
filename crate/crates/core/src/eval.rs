//! Abstract-level and sentence-level evaluation in all four modes.
//!
//! Sentence level: a predicted rationale sentence is correct when it belongs
//! to a gold rationale group that is fully predicted and the abstract's
//! predicted stance is not NOINFO (Selection-Only) or equals the gold stance
//! (Selection+Label). Abstract level: a reported abstract is correct when it
//! is gold evidence with the right stance (Label-Only), additionally needing
//! its predicted sentences to contain a complete gold group
//! (Label+Rationale). All counts are micro-averaged.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::data::{Claim, ClaimPrediction, Stance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentenceMode {
    SelectionOnly,
    SelectionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbstractMode {
    LabelOnly,
    LabelRationale,
}

/// Micro-averaged precision/recall/F1 with their raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl ModeMetrics {
    pub fn from_counts(tp: usize, predicted: usize, gold: usize) -> ModeMetrics {
        let precision = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = if gold == 0 { 0.0 } else { tp as f64 / gold as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ModeMetrics {
            precision,
            recall,
            f1,
            tp,
            predicted,
            gold,
        }
    }
}

/// All four evaluation modes for one (gold, predictions) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sentence_selection_only: ModeMetrics,
    pub sentence_selection_label: ModeMetrics,
    pub abstract_label_only: ModeMetrics,
    pub abstract_label_rationale: ModeMetrics,
}

fn index_claims(gold_claims: &[Claim]) -> BTreeMap<u64, &Claim> {
    gold_claims.iter().map(|c| (c.claim_id, c)).collect()
}

fn check_known(predictions: &[ClaimPrediction], gold: &BTreeMap<u64, &Claim>) -> Result<()> {
    for p in predictions {
        if !gold.contains_key(&p.claim_id) {
            return Err(Error::validation(format!(
                "prediction references unknown claim_id {}",
                p.claim_id
            )));
        }
    }
    Ok(())
}

/// Sentence-level evaluation over every predicted rationale sentence.
pub fn sentence_metrics(
    predictions: &[ClaimPrediction],
    gold_claims: &[Claim],
    mode: SentenceMode,
) -> Result<ModeMetrics> {
    let gold = index_claims(gold_claims);
    check_known(predictions, &gold)?;

    let gold_total: usize = gold_claims
        .iter()
        .flat_map(|c| c.evidence.values())
        .flat_map(|ev| ev.rationale_groups.iter())
        .map(Vec::len)
        .sum();

    let mut predicted = 0usize;
    let mut tp = 0usize;
    for row in predictions {
        let claim = gold[&row.claim_id];
        for (doc_id, pred_ev) in &row.evidence {
            let pred_set: BTreeSet<usize> = pred_ev.sentences.iter().copied().collect();
            predicted += pred_set.len();
            let Some(gold_ev) = claim.evidence.get(doc_id) else {
                continue;
            };
            let stance_ok = match mode {
                SentenceMode::SelectionOnly => pred_ev.stance != Stance::NoInfo,
                SentenceMode::SelectionLabel => pred_ev.stance == gold_ev.stance,
            };
            if !stance_ok {
                continue;
            }
            for &s in &pred_set {
                let in_complete_group = gold_ev
                    .rationale_groups
                    .iter()
                    .any(|g| g.contains(&s) && g.iter().all(|i| pred_set.contains(i)));
                if in_complete_group {
                    tp += 1;
                }
            }
        }
    }
    Ok(ModeMetrics::from_counts(tp, predicted, gold_total))
}

/// Abstract-level evaluation over every reported (claim, abstract) pair.
pub fn abstract_metrics(
    predictions: &[ClaimPrediction],
    gold_claims: &[Claim],
    mode: AbstractMode,
) -> Result<ModeMetrics> {
    let gold = index_claims(gold_claims);
    check_known(predictions, &gold)?;

    let gold_total: usize = gold_claims.iter().map(|c| c.evidence.len()).sum();

    let mut predicted = 0usize;
    let mut tp = 0usize;
    for row in predictions {
        let claim = gold[&row.claim_id];
        for (doc_id, pred_ev) in &row.evidence {
            predicted += 1;
            let Some(gold_ev) = claim.evidence.get(doc_id) else {
                continue;
            };
            if pred_ev.stance != gold_ev.stance {
                continue;
            }
            let rationale_ok = match mode {
                AbstractMode::LabelOnly => true,
                AbstractMode::LabelRationale => {
                    let pred_set: BTreeSet<usize> = pred_ev.sentences.iter().copied().collect();
                    gold_ev
                        .rationale_groups
                        .iter()
                        .any(|g| g.iter().all(|i| pred_set.contains(i)))
                }
            };
            if rationale_ok {
                tp += 1;
            }
        }
    }
    Ok(ModeMetrics::from_counts(tp, predicted, gold_total))
}

/// Runs all four modes.
pub fn full_report(predictions: &[ClaimPrediction], gold_claims: &[Claim]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        sentence_selection_only: sentence_metrics(
            predictions,
            gold_claims,
            SentenceMode::SelectionOnly,
        )?,
        sentence_selection_label: sentence_metrics(
            predictions,
            gold_claims,
            SentenceMode::SelectionLabel,
        )?,
        abstract_label_only: abstract_metrics(predictions, gold_claims, AbstractMode::LabelOnly)?,
        abstract_label_rationale: abstract_metrics(
            predictions,
            gold_claims,
            AbstractMode::LabelRationale,
        )?,
    })
}
