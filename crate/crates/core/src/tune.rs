//! Random search over the four loss weights.
//!
//! The sampler is uniform and seeded; the contract is over the trial log:
//! every sampled tuple lies in its range and the returned tuple maximizes
//! the logged objective.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossWeights;

/// Search configuration. Ranges default to `[0.1, 12]` for all four weights
/// with 100 trials; one fifth of the training claims train each trial and
/// another fifth scores it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SearchSpec {
    pub ranges: [(f64, f64); 4],
    pub trials: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
    pub objective: String,
}

impl Default for SearchSpec {
    fn default() -> SearchSpec {
        SearchSpec {
            ranges: [(0.1, 12.0); 4],
            trials: 100,
            train_fraction: 0.2,
            val_fraction: 0.2,
            seed: 42,
            objective: "mean of abstract Label+Rationale F1 and sentence Selection+Label F1"
                .to_string(),
        }
    }
}

/// One search trial as logged.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub weights: LossWeights,
    pub objective: Option<f64>,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

/// Samples weight tuples, trains and scores each, and returns the argmax
/// plus the full log. A failed trial is recorded and the search continues.
pub fn search<T, TrainFn, EvalFn>(
    mut train_fn: TrainFn,
    mut eval_fn: EvalFn,
    spec: &SearchSpec,
) -> Result<(LossWeights, Vec<Trial>)>
where
    TrainFn: FnMut(&LossWeights) -> Result<T>,
    EvalFn: FnMut(&T) -> Result<f64>,
{
    assert!(spec.trials >= 1, "search needs at least one trial");
    for (lo, hi) in spec.ranges {
        assert!(lo <= hi && lo >= 0.0, "bad weight range [{lo}, {hi}]");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sampled: Vec<LossWeights> = (0..spec.trials)
        .map(|_| {
            let mut draw = [0.0; 4];
            for (slot, (lo, hi)) in draw.iter_mut().zip(spec.ranges) {
                *slot = rng.gen_range(lo..=hi);
            }
            LossWeights {
                lambda1: draw[0],
                lambda2: draw[1],
                lambda3: draw[2],
                gamma: draw[3],
            }
        })
        .collect();

    let mut log = Vec::with_capacity(spec.trials);
    for (index, weights) in sampled.into_iter().enumerate() {
        let outcome = train_fn(&weights).and_then(|model| eval_fn(&model));
        let trial = match outcome {
            Ok(objective) => Trial {
                index,
                weights,
                objective: Some(objective),
                status: TrialStatus::Ok,
            },
            Err(e) => Trial {
                index,
                weights,
                objective: None,
                status: TrialStatus::Failed(e.to_string()),
            },
        };
        log.push(trial);
    }

    let best = log
        .iter()
        .filter(|t| t.objective.is_some())
        .max_by(|a, b| {
            a.objective
                .unwrap()
                .total_cmp(&b.objective.unwrap())
                // first maximum wins on ties
                .then(b.index.cmp(&a.index))
        })
        .ok_or_else(|| Error::validation("every search trial failed"))?;
    Ok((best.weights, log))
}

/// Writes the trial log as one JSON record per line.
pub fn save_trials(path: &Path, trials: &[Trial]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for trial in trials {
        let json = serde_json::to_string(trial)
            .map_err(|e| Error::validation(format!("serialization failed: {e}")))?;
        writeln!(w, "{json}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
