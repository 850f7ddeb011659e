//! Command-line entry point: `ingest`, `retrieve`, `train`, `predict`,
//! `evaluate` and `tune` subcommands over the file formats documented in
//! [`crate::data`].
//!
//! Exit codes: 0 on success, 1 on validation/data errors, 2 on usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{build_instances, load_claims, load_corpus, load_predictions, save_predictions, Claim};
use crate::error::{Error, Result};
use crate::eval::full_report;
use crate::loss::LossWeights;
use crate::retrieval::{load_candidates, save_candidates, topk_candidates, HashedBowEmbedder};
use crate::train::{predict_all, train_with_progress, ModelCheckpoint, TrainConfig};
use crate::tune::{save_trials, search, SearchSpec};

#[derive(Parser)]
#[command(
    name = "claimverify",
    version,
    about = "Joint abstract retrieval, rationale selection and stance prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate corpus and claims files and report their sizes.
    Ingest(IngestArgs),
    /// Rank candidate abstracts per claim and write the lists.
    Retrieve(RetrieveArgs),
    /// Train the joint model and write a checkpoint.
    Train(TrainArgs),
    /// Run end-to-end inference and write predictions.
    Predict(PredictArgs),
    /// Score predictions against gold annotations in all four modes.
    Evaluate(EvaluateArgs),
    /// Search the four loss weights and write the trial log.
    Tune(TuneArgs),
}

#[derive(Args, Serialize)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
}

#[derive(Args, Serialize)]
struct RetrieveArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    /// Output path for the candidate lists.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    k_ret: usize,
    /// Bag-of-words embedder buckets.
    #[arg(long, default_value_t = 4096)]
    dim: usize,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    /// Candidate lists from `retrieve`; computed on the fly when omitted.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Output path for the checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = LossWeights::default().lambda1)]
    lambda1: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda2)]
    lambda2: f64,
    #[arg(long, default_value_t = LossWeights::default().lambda3)]
    lambda3: f64,
    #[arg(long, default_value_t = LossWeights::default().gamma)]
    gamma: f64,
    #[arg(long, default_value_t = TrainConfig::default().k_tra)]
    k_tra: usize,
    #[arg(long, default_value_t = TrainConfig::default().k_ret)]
    k_ret: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_len)]
    max_len: usize,
    /// Encoder width.
    #[arg(long, default_value_t = TrainConfig::default().d)]
    dim: usize,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output path for predictions.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 30)]
    k_ret: usize,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Gold claims file.
    #[arg(long)]
    gold: PathBuf,
    /// Prediction file.
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Args, Serialize)]
struct TuneArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    /// Output path for the trial log.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SearchSpec::default().trials)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Epochs per trial.
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().k_tra)]
    k_tra: usize,
    #[arg(long, default_value_t = TrainConfig::default().k_ret)]
    k_ret: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_len)]
    max_len: usize,
    #[arg(long, default_value_t = TrainConfig::default().d)]
    dim: usize,
}

/// Parses and runs a command line; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Retrieve(args) => retrieve(args),
        Command::Train(args) => train_cmd(args),
        Command::Predict(args) => predict_cmd(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Tune(args) => tune(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn print_config(name: &str, args: &impl Serialize) {
    let json = serde_json::to_string(args).unwrap_or_else(|_| "{}".to_string());
    eprintln!("{name} config: {json}");
}

fn ingest(args: IngestArgs) -> Result<()> {
    print_config("ingest", &args);
    let corpus = load_corpus(&args.corpus)?;
    let claims = load_claims(&args.claims)?;
    let by_id: BTreeMap<u64, usize> = corpus
        .iter()
        .map(|d| (d.doc_id, d.sentences.len()))
        .collect();
    let mut evidence_pairs = 0usize;
    for claim in &claims {
        for (doc_id, ev) in &claim.evidence {
            let len = by_id.get(doc_id).ok_or_else(|| {
                Error::validation(format!(
                    "claim {}: evidence doc {doc_id} not in corpus",
                    claim.claim_id
                ))
            })?;
            for group in &ev.rationale_groups {
                for &s in group {
                    if s >= *len {
                        return Err(Error::validation(format!(
                            "claim {}: rationale sentence {s} out of range for doc {doc_id}",
                            claim.claim_id
                        )));
                    }
                }
            }
            evidence_pairs += 1;
        }
    }
    println!(
        "{}",
        serde_json::json!({
            "documents": corpus.len(),
            "claims": claims.len(),
            "evidence_pairs": evidence_pairs,
        })
    );
    Ok(())
}

fn retrieve(args: RetrieveArgs) -> Result<()> {
    print_config("retrieve", &args);
    let corpus = load_corpus(&args.corpus)?;
    let claims = load_claims(&args.claims)?;
    let embedder = HashedBowEmbedder::new(args.dim);
    let lists: Vec<_> = claims
        .iter()
        .map(|c| topk_candidates(c, &corpus, &embedder, args.k_ret))
        .collect();
    save_candidates(&args.out, &lists)?;
    eprintln!("wrote {} candidate lists to {}", lists.len(), args.out.display());
    Ok(())
}

fn candidate_map(
    claims: &[Claim],
    corpus: &[crate::data::Document],
    path: Option<&PathBuf>,
    k: usize,
    dim: usize,
) -> Result<BTreeMap<u64, Vec<u64>>> {
    match path {
        Some(path) => Ok(load_candidates(path)?
            .into_iter()
            .map(|l| (l.claim_id, l.doc_ids()))
            .collect()),
        None => {
            let embedder = HashedBowEmbedder::new(dim);
            Ok(claims
                .iter()
                .map(|c| {
                    let list = topk_candidates(c, corpus, &embedder, k);
                    (c.claim_id, list.doc_ids())
                })
                .collect())
        }
    }
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    print_config("train", &args);
    let corpus = load_corpus(&args.corpus)?;
    let claims = load_claims(&args.claims)?;
    let config = TrainConfig {
        weights: LossWeights {
            lambda1: args.lambda1,
            lambda2: args.lambda2,
            lambda3: args.lambda3,
            gamma: args.gamma,
        },
        epochs: args.epochs,
        k_tra: args.k_tra,
        k_ret: args.k_ret,
        max_len: args.max_len,
        d: args.dim,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let candidates = candidate_map(&claims, &corpus, args.candidates.as_ref(), config.k_tra, 4096)?;
    let instances = build_instances(&claims, &corpus, &candidates, config.k_tra)?;
    eprintln!("training on {} instances", instances.len());
    let outcome = train_with_progress(&instances, &claims, &corpus, &config, |epoch, losses| {
        eprintln!(
            "epoch={epoch} l_ret={:.6} l_rat={:.6} l_sta={:.6} l_rr={:.6} l_total={:.6}",
            losses.l_ret, losses.l_rat, losses.l_sta, losses.l_rr, losses.l_total
        );
    })?;
    outcome.checkpoint.save(&args.checkpoint)?;
    eprintln!("checkpoint written to {}", args.checkpoint.display());
    Ok(())
}

fn predict_cmd(args: PredictArgs) -> Result<()> {
    print_config("predict", &args);
    let corpus = load_corpus(&args.corpus)?;
    let claims = load_claims(&args.claims)?;
    let checkpoint = ModelCheckpoint::load(&args.checkpoint)?;
    let embedder = HashedBowEmbedder::default();
    let predictions = predict_all(&checkpoint, &claims, &corpus, &embedder, args.k_ret)?;
    save_predictions(&args.pred, &predictions)?;
    eprintln!(
        "wrote predictions for {} claims to {}",
        predictions.len(),
        args.pred.display()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    print_config("evaluate", &args);
    let gold = load_claims(&args.gold)?;
    let predictions = load_predictions(&args.pred)?;
    let report = full_report(&predictions, &gold)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::validation(format!("report serialization failed: {e}")))?;
    println!("{json}");
    Ok(())
}

fn tune(args: TuneArgs) -> Result<()> {
    print_config("tune", &args);
    let corpus = load_corpus(&args.corpus)?;
    let claims = load_claims(&args.claims)?;
    let spec = SearchSpec {
        trials: args.trials,
        seed: args.seed,
        ..SearchSpec::default()
    };

    let mut order: Vec<usize> = (0..claims.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let n_train = ((claims.len() as f64 * spec.train_fraction).ceil() as usize).max(1);
    let n_val = ((claims.len() as f64 * spec.val_fraction).ceil() as usize).max(1);
    if n_train + n_val > claims.len() {
        return Err(Error::validation(format!(
            "{} claims cannot fill a {:.0}%/{:.0}% tuning split",
            claims.len(),
            spec.train_fraction * 100.0,
            spec.val_fraction * 100.0
        )));
    }
    let train_claims: Vec<Claim> = order[..n_train].iter().map(|&i| claims[i].clone()).collect();
    let val_claims: Vec<Claim> = order[n_train..n_train + n_val]
        .iter()
        .map(|&i| claims[i].clone())
        .collect();
    eprintln!(
        "tuning on {} claims, validating on {}",
        train_claims.len(),
        val_claims.len()
    );

    let candidates = candidate_map(&train_claims, &corpus, None, args.k_tra, 4096)?;
    let instances = build_instances(&train_claims, &corpus, &candidates, args.k_tra)?;
    let embedder = HashedBowEmbedder::default();

    let (best, log) = search(
        |weights| {
            let config = TrainConfig {
                weights: *weights,
                epochs: args.epochs,
                k_tra: args.k_tra,
                k_ret: args.k_ret,
                max_len: args.max_len,
                d: args.dim,
                seed: spec.seed,
                ..TrainConfig::default()
            };
            crate::train::train(&instances, &train_claims, &corpus, &config)
                .map(|outcome| outcome.checkpoint)
        },
        |checkpoint| {
            let predictions = predict_all(checkpoint, &val_claims, &corpus, &embedder, args.k_ret)?;
            let report = full_report(&predictions, &val_claims)?;
            Ok((report.abstract_label_rationale.f1 + report.sentence_selection_label.f1) / 2.0)
        },
        &spec,
    )?;
    save_trials(&args.out, &log)?;
    println!(
        "{}",
        serde_json::json!({
            "lambda1": best.lambda1,
            "lambda2": best.lambda2,
            "lambda3": best.lambda3,
            "gamma": best.gamma,
            "objective": spec.objective,
        })
    );
    eprintln!("trial log written to {}", args.out.display());
    Ok(())
}
