//! Joint training of both components, fold runners and checkpointing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{NnError, Tape, Var};
use crate::conversation::ConversationThread;
use crate::corpus::{materialize_fold, Corpus, DataError, Fold, FoldPlan};
use crate::metrics::{macro_f1, ConfusionMatrix};
use crate::model::{
    argmax, encode_thread, Mode, Model, ModelConfig, ModelError, ThreadEncoding, ThreadPrediction,
};
use crate::nn::{adam_step, AdamState, ParameterSet};
use crate::text::{load_embeddings, TextError, Vocab};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("data error: {0}")]
    Data(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Corpus(#[from] DataError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Which loss drives the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Veracity loss plus lambda times the stance loss.
    Joint,
    /// Veracity loss only (lambda treated as 0).
    SingleTaskVeracity,
    /// Stance loss only; the veracity head is left untrained.
    StanceOnly,
}

impl std::str::FromStr for TrainMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(TrainMode::Joint),
            "single-task" | "single-task-veracity" => Ok(TrainMode::SingleTaskVeracity),
            "stance-only" => Ok(TrainMode::StanceOnly),
            other => Err(format!("unknown train mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Global-norm gradient clip; None disables clipping.
    pub grad_clip: Option<f64>,
    /// Early-stopping patience on dev loss; None always trains to max_epochs.
    pub patience: Option<usize>,
    /// Restore the parameters with the best dev veracity macro-F1 when a
    /// dev set exists; otherwise the final epoch's parameters are kept.
    pub select_best_dev: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Joint,
            lambda: 1.0,
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 200,
            dropout: 0.5,
            seed: 7,
            grad_clip: Some(5.0),
            patience: Some(20),
            select_best_dev: true,
        }
    }
}

impl TrainConfig {
    /// The lambda actually applied, honoring the single-task reduction.
    pub fn effective_lambda(&self) -> f64 {
        match self.mode {
            TrainMode::SingleTaskVeracity => 0.0,
            _ => self.lambda,
        }
    }
}

/// Per-epoch training record. Losses and accuracies are measured on the
/// forward passes that drove the updates, so with a nonzero dropout rate
/// they carry dropout noise; dev metrics always come from eval-mode passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub joint_loss: f64,
    pub stance_loss: f64,
    pub veracity_loss: f64,
    pub stance_accuracy: f64,
    pub veracity_accuracy: f64,
    pub dev_loss: Option<f64>,
    pub dev_veracity_macro_f1: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn write_jsonl(&self, path: &Path) -> Result<(), TrainError> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("epoch serializes"));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub steps: u64,
}

/// Batch objective: mean veracity loss plus lambda times the mean stance
/// cross-entropy over every labeled tweet in the batch. With lambda = 0 the
/// result is the veracity mean, bitwise.
pub fn joint_loss(
    tape: &mut Tape,
    veracity_losses: &[Var],
    stance_sums: &[(Var, usize)],
    lambda: f64,
) -> Result<Var, NnError> {
    if veracity_losses.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let v_sum = tape.add_n(veracity_losses)?;
    let v_mean = tape.scale(v_sum, 1.0 / veracity_losses.len() as f64);
    let labeled: usize = stance_sums.iter().map(|(_, c)| c).sum();
    if lambda == 0.0 || labeled == 0 {
        return Ok(v_mean);
    }
    let sums: Vec<Var> = stance_sums.iter().map(|(v, _)| *v).collect();
    let s_sum = tape.add_n(&sums)?;
    let s_term = tape.scale(s_sum, lambda / labeled as f64);
    tape.add(v_mean, s_term)
}

struct BatchOutcome {
    loss: f64,
    veracity_nll_sum: f64,
    veracity_count: usize,
    stance_nll_sum: f64,
    stance_labeled: usize,
    stance_correct: usize,
    veracity_correct: usize,
}

fn run_batch(
    model: &mut Model,
    adam: &mut AdamState,
    encodings: &[&ThreadEncoding],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<BatchOutcome>, TrainError> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let mut mode = Mode::Train {
        rng,
        dropout: config.dropout,
    };
    let mut veracity_losses = Vec::new();
    let mut stance_sums = Vec::new();
    let mut out = BatchOutcome {
        loss: 0.0,
        veracity_nll_sum: 0.0,
        veracity_count: 0,
        stance_nll_sum: 0.0,
        stance_labeled: 0,
        stance_correct: 0,
        veracity_correct: 0,
    };
    for enc in encodings {
        let pass = model.forward(&mut tape, &bound, enc, &mut mode)?;
        if config.mode != TrainMode::StanceOnly {
            let nll = pass
                .veracity_nll
                .ok_or_else(|| TrainError::Data(format!("thread {} has no veracity label", enc.thread_id)))?;
            out.veracity_nll_sum += tape.value(nll).item();
            out.veracity_count += 1;
            veracity_losses.push(nll);
            let probs = tape.value(pass.veracity_probs);
            if let Some(gold) = enc.veracity {
                if argmax(probs.data()) == gold.index() {
                    out.veracity_correct += 1;
                }
            }
        }
        if let Some(sum) = pass.stance_nll_sum {
            out.stance_nll_sum += tape.value(sum).item();
            out.stance_labeled += pass.labeled_count;
            stance_sums.push((sum, pass.labeled_count));
        }
        let probs = tape.value(pass.stance_probs);
        for (i, stance) in enc.stances.iter().enumerate() {
            if let Some(gold) = stance {
                if argmax(probs.row(i)) == gold.index() {
                    out.stance_correct += 1;
                }
            }
        }
    }

    let loss = match config.mode {
        TrainMode::Joint | TrainMode::SingleTaskVeracity => joint_loss(
            &mut tape,
            &veracity_losses,
            &stance_sums,
            config.effective_lambda(),
        )?,
        TrainMode::StanceOnly => {
            if out.stance_labeled == 0 {
                return Ok(None); // nothing to learn from in this batch
            }
            let sums: Vec<Var> = stance_sums.iter().map(|(v, _)| *v).collect();
            let s = tape.add_n(&sums)?;
            tape.scale(s, 1.0 / out.stance_labeled as f64)
        }
    };
    out.loss = tape.value(loss).item();
    if !out.loss.is_finite() {
        return Ok(Some(out)); // caller turns this into a divergence error
    }
    tape.backward(loss)?;
    let mut grads = bound.gradients(&tape, &model.params);
    if let Some(max_norm) = config.grad_clip {
        grads.clip_global_norm(max_norm);
    }
    adam_step(&mut model.params, &grads, adam)?;
    Ok(Some(out))
}

fn eval_dev(model: &Model, encodings: &[ThreadEncoding], lambda: f64) -> Result<(f64, f64), TrainError> {
    let mut v_sum = 0.0;
    let mut v_count = 0usize;
    let mut s_sum = 0.0;
    let mut s_count = 0usize;
    let mut cm = ConfusionMatrix::new(3);
    for enc in encodings {
        let mut tape = Tape::new();
        let bound = model.params.bind(&mut tape);
        let pass = model.forward(&mut tape, &bound, enc, &mut Mode::Eval)?;
        if let Some(nll) = pass.veracity_nll {
            v_sum += tape.value(nll).item();
            v_count += 1;
        }
        if let Some(sum) = pass.stance_nll_sum {
            s_sum += tape.value(sum).item();
            s_count += pass.labeled_count;
        }
        if let Some(gold) = enc.veracity {
            let pred = argmax(tape.value(pass.veracity_probs).data());
            cm.add(gold.index(), pred)
                .map_err(|e| TrainError::Data(e.to_string()))?;
        }
    }
    let v_mean = if v_count > 0 { v_sum / v_count as f64 } else { 0.0 };
    let s_mean = if s_count > 0 { s_sum / s_count as f64 } else { 0.0 };
    let loss = v_mean + lambda * s_mean;
    let f1 = macro_f1(&cm).unwrap_or(0.0);
    Ok((loss, f1))
}

/// Train a model on `train_threads`, optionally early-stopping and selecting
/// on `dev_threads`. Checkpoints land in `checkpoint_dir` when given
/// (`last.json` every epoch, `best.json` on dev improvement).
pub fn train(
    train_threads: &[&ConversationThread],
    dev_threads: Option<&[&ConversationThread]>,
    model_config: &ModelConfig,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    if train_threads.is_empty() {
        return Err(TrainError::Data("empty training set".into()));
    }
    if config.mode != TrainMode::StanceOnly {
        for t in train_threads {
            if t.veracity.is_none() {
                return Err(TrainError::Data(format!(
                    "thread {} has no veracity label but veracity training was requested",
                    t.thread_id
                )));
            }
        }
    }

    let vocab = Vocab::build(
        train_threads
            .iter()
            .flat_map(|t| t.tweets.iter().map(|tw| tw.text.as_str())),
    );
    let pretrained = match &model_config.embedding_file {
        Some(path) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xe1b);
            Some(load_embeddings(
                Path::new(path),
                &vocab,
                model_config.embed_dim,
                &mut rng,
            )?)
        }
        None => None,
    };
    let mut model = Model::new(model_config.clone(), vocab, config.seed, pretrained)?;
    let mut adam = AdamState::new(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let train_encodings: Vec<ThreadEncoding> = train_threads
        .iter()
        .map(|t| encode_thread(t, &model.vocab, model.config.gcn.variant))
        .collect::<Result<_, _>>()?;
    let dev_encodings: Option<Vec<ThreadEncoding>> = dev_threads
        .map(|threads| {
            threads
                .iter()
                .map(|t| encode_thread(t, &model.vocab, model.config.gcn.variant))
                .collect::<Result<_, _>>()
        })
        .transpose()?;

    let mut log = TrainLog::default();
    let mut best_dev_f1 = f64::NEG_INFINITY;
    let mut best_params: Option<ParameterSet> = None;
    let mut best_dev_loss = f64::INFINITY;
    let mut stale_epochs = 0usize;

    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..train_encodings.len()).collect();
        order.shuffle(&mut rng);

        let mut totals = BatchOutcome {
            loss: 0.0,
            veracity_nll_sum: 0.0,
            veracity_count: 0,
            stance_nll_sum: 0.0,
            stance_labeled: 0,
            stance_correct: 0,
            veracity_correct: 0,
        };
        for chunk in order.chunks(config.batch_size.max(1)) {
            let encs: Vec<&ThreadEncoding> = chunk.iter().map(|&i| &train_encodings[i]).collect();
            // A probability hitting exact zero sends the cross-entropy to
            // infinity; that is divergence, not a caller mistake.
            let batch = run_batch(&mut model, &mut adam, &encs, config, &mut rng).map_err(|e| {
                match e {
                    TrainError::Nn(NnError::DomainError(_))
                    | TrainError::Model(ModelError::Nn(NnError::DomainError(_))) => {
                        TrainError::Divergence { epoch }
                    }
                    other => other,
                }
            })?;
            if let Some(out) = batch {
                if !out.loss.is_finite() {
                    return Err(TrainError::Divergence { epoch });
                }
                totals.veracity_nll_sum += out.veracity_nll_sum;
                totals.veracity_count += out.veracity_count;
                totals.stance_nll_sum += out.stance_nll_sum;
                totals.stance_labeled += out.stance_labeled;
                totals.stance_correct += out.stance_correct;
                totals.veracity_correct += out.veracity_correct;
            }
        }

        let veracity_loss = if totals.veracity_count > 0 {
            totals.veracity_nll_sum / totals.veracity_count as f64
        } else {
            0.0
        };
        let stance_loss = if totals.stance_labeled > 0 {
            totals.stance_nll_sum / totals.stance_labeled as f64
        } else {
            0.0
        };
        let joint = match config.mode {
            TrainMode::StanceOnly => stance_loss,
            _ => veracity_loss + config.effective_lambda() * stance_loss,
        };
        if !joint.is_finite() {
            return Err(TrainError::Divergence { epoch });
        }

        let mut stats = EpochStats {
            epoch,
            joint_loss: joint,
            stance_loss,
            veracity_loss,
            stance_accuracy: if totals.stance_labeled > 0 {
                totals.stance_correct as f64 / totals.stance_labeled as f64
            } else {
                0.0
            },
            veracity_accuracy: if totals.veracity_count > 0 {
                totals.veracity_correct as f64 / totals.veracity_count as f64
            } else {
                0.0
            },
            dev_loss: None,
            dev_veracity_macro_f1: None,
            wall_ms: 0,
        };

        let mut stop = false;
        if let Some(dev) = &dev_encodings {
            let (dev_loss, dev_f1) = eval_dev(&model, dev, config.effective_lambda())?;
            stats.dev_loss = Some(dev_loss);
            stats.dev_veracity_macro_f1 = Some(dev_f1);
            if config.select_best_dev && dev_f1 > best_dev_f1 {
                best_dev_f1 = dev_f1;
                best_params = Some(model.params.clone());
                if let Some(dir) = checkpoint_dir {
                    save_checkpoint(&model, config.seed, adam.step, &dir.join("best.json"))?;
                }
            }
            if let Some(patience) = config.patience {
                if dev_loss + 1e-12 < best_dev_loss {
                    best_dev_loss = dev_loss;
                    stale_epochs = 0;
                } else {
                    stale_epochs += 1;
                    if stale_epochs >= patience {
                        stop = true;
                    }
                }
            }
        }

        stats.wall_ms = start.elapsed().as_millis() as u64;
        log.epochs.push(stats);
        if let Some(dir) = checkpoint_dir {
            save_checkpoint(&model, config.seed, adam.step, &dir.join("last.json"))?;
        }
        if stop {
            break;
        }
    }

    if let Some(best) = best_params {
        model.params = best;
    }
    debug_assert!(model.params.all_finite());
    Ok(TrainOutcome {
        model,
        log,
        steps: adam.step,
    })
}

pub fn predict_threads(
    model: &Model,
    threads: &[&ConversationThread],
) -> Result<Vec<ThreadPrediction>, ModelError> {
    threads.iter().map(|t| model.predict(t)).collect()
}

/// The result of training and evaluating one fold.
#[derive(Debug)]
pub struct FoldRun {
    pub fold: Fold,
    pub model: Model,
    pub log: TrainLog,
    pub predictions: Vec<ThreadPrediction>,
}

/// Train one model per fold; fold seeds derive from the base seed so folds
/// are independent and reproducible regardless of worker count.
pub fn run_fold_plan(
    corpus: &Corpus,
    plan: &FoldPlan,
    model_config: &ModelConfig,
    config: &TrainConfig,
    jobs: usize,
    checkpoint_root: Option<&Path>,
) -> Result<Vec<FoldRun>, TrainError> {
    let jobs = jobs.max(1);
    let indices: Vec<usize> = (0..plan.folds.len()).collect();
    let results: Vec<Option<Result<FoldRun, TrainError>>> =
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for worker in 0..jobs.min(plan.folds.len().max(1)) {
                let worker_indices: Vec<usize> = indices
                    .iter()
                    .copied()
                    .filter(|i| i % jobs == worker)
                    .collect();
                let plan = &plan;
                let corpus = &corpus;
                let model_config = &model_config;
                let config = &config;
                let checkpoint_root: Option<PathBuf> = checkpoint_root.map(|p| p.to_path_buf());
                handles.push(scope.spawn(move || {
                    worker_indices
                        .into_iter()
                        .map(|i| (i, run_single_fold(corpus, &plan.folds[i], i, model_config, config, checkpoint_root.as_deref())))
                        .collect::<Vec<_>>()
                }));
            }
            let mut slots: Vec<Option<Result<FoldRun, TrainError>>> =
                (0..plan.folds.len()).map(|_| None).collect();
            for handle in handles {
                for (i, res) in handle.join().expect("fold worker panicked") {
                    slots[i] = Some(res);
                }
            }
            slots
        });
    results
        .into_iter()
        .map(|slot| slot.expect("every fold scheduled"))
        .collect()
}

fn run_single_fold(
    corpus: &Corpus,
    fold: &Fold,
    fold_index: usize,
    model_config: &ModelConfig,
    config: &TrainConfig,
    checkpoint_root: Option<&Path>,
) -> Result<FoldRun, TrainError> {
    let (train_threads, test_threads) = materialize_fold(corpus, fold)?;
    let fold_config = TrainConfig {
        seed: config.seed.wrapping_add(fold_index as u64),
        ..config.clone()
    };
    let fold_dir = checkpoint_root.map(|root| root.join(format!("fold-{}", fold.name)));
    if let Some(dir) = &fold_dir {
        std::fs::create_dir_all(dir)?;
    }
    let outcome = train(
        &train_threads,
        None,
        model_config,
        &fold_config,
        fold_dir.as_deref(),
    )?;
    let predictions = predict_threads(&outcome.model, &test_threads)?;
    Ok(FoldRun {
        fold: fold.clone(),
        model: outcome.model,
        log: outcome.log,
        predictions,
    })
}

/// On-disk model container: parameter path -> shape -> row-major f64 values,
/// plus the seed, optimizer step counter, config and vocabulary. JSON with
/// full-precision floats, so save -> load round-trips bit-exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub step: u64,
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ParameterSet,
}

pub const CHECKPOINT_FORMAT: &str = "converse-checkpoint-v1";

pub fn save_checkpoint(model: &Model, seed: u64, step: u64, path: &Path) -> Result<(), TrainError> {
    if !model.params.all_finite() {
        return Err(TrainError::Checkpoint(
            "refusing to write non-finite parameters".into(),
        ));
    }
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        seed,
        step,
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        params: model.params.clone(),
    };
    let json = serde_json::to_string(&ckpt).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, u64, u64), TrainError> {
    let json = std::fs::read_to_string(path)?;
    let mut ckpt: Checkpoint =
        serde_json::from_str(&json).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    if ckpt.format != CHECKPOINT_FORMAT {
        return Err(TrainError::Checkpoint(format!(
            "unsupported checkpoint format {:?}",
            ckpt.format
        )));
    }
    ckpt.vocab.rebuild_index();
    let model = Model {
        config: ckpt.config,
        vocab: ckpt.vocab,
        params: ckpt.params,
    };
    Ok((model, ckpt.seed, ckpt.step))
}
