//! Layered run configuration: built-in defaults, then an optional TOML
//! file, then command-line flags.

use std::path::Path;

use converse_core::adjacency::GcnVariant;
use converse_core::model::{ModelConfig, RnnVariant};
use converse_core::train::{TrainConfig, TrainMode};
use serde::Deserialize;

use crate::args::TrainOpts;
use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<ModelSection>,
    veracity: Option<VeracitySection>,
    train: Option<TrainSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    embed_dim: Option<usize>,
    bgru_hidden: Option<usize>,
    gcn_layers: Option<Vec<usize>>,
    gcn_variant: Option<String>,
    gcn_dropout: Option<f64>,
    final_tanh: Option<bool>,
    train_embeddings: Option<bool>,
    embedding_file: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VeracitySection {
    rnn: Option<String>,
    hidden: Option<usize>,
    use_stance_features: Option<bool>,
    cnn_windows: Option<Vec<usize>>,
    cnn_feature_maps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    mode: Option<String>,
    lambda: Option<f64>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    max_epochs: Option<usize>,
    dropout: Option<f64>,
    seed: Option<u64>,
    grad_clip: Option<f64>,
    patience: Option<usize>,
    select_best_dev: Option<bool>,
}

/// Seed fallback when neither flags nor config provide one.
pub const SEED_ENV: &str = "CONVERSE_VERIFY_SEED";

pub fn resolve(opts: &TrainOpts) -> Result<(ModelConfig, TrainConfig), CliError> {
    // Base depends on the profile: published-scale dims for the benchmark
    // profiles, small desk-scale dims otherwise.
    let (mut model, mut train) = match opts.profile.as_deref() {
        None => (ModelConfig::small(), TrainConfig::default()),
        Some("semeval") => (
            ModelConfig::default(),
            TrainConfig {
                learning_rate: 0.001,
                ..TrainConfig::default()
            },
        ),
        Some("pheme") => (
            ModelConfig::default(),
            TrainConfig {
                learning_rate: 0.005,
                ..TrainConfig::default()
            },
        ),
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown profile {other:?} (expected semeval or pheme)"
            )))
        }
    };

    if let Some(path) = &opts.config {
        let file = load_file(path)?;
        if let Some(m) = file.model {
            if let Some(v) = m.embed_dim {
                model.embed_dim = v;
            }
            if let Some(v) = m.bgru_hidden {
                model.bgru_hidden = v;
            }
            if let Some(v) = m.gcn_layers {
                model.gcn.layer_sizes = v;
            }
            if let Some(v) = m.gcn_variant {
                model.gcn.variant = parse_variant(&v)?;
            }
            if let Some(v) = m.gcn_dropout {
                model.gcn.dropout = v;
            }
            if let Some(v) = m.final_tanh {
                model.gcn.final_tanh = v;
            }
            if let Some(v) = m.train_embeddings {
                model.train_embeddings = v;
            }
            if let Some(v) = m.embedding_file {
                model.embedding_file = Some(v);
            }
        }
        if let Some(v) = file.veracity {
            if let Some(r) = v.rnn {
                model.veracity.rnn_variant = parse_rnn(&r)?;
            }
            if let Some(h) = v.hidden {
                model.veracity.hidden_size = h;
            }
            if let Some(u) = v.use_stance_features {
                model.veracity.use_stance_features = u;
            }
            if let Some(w) = v.cnn_windows {
                model.veracity.cnn_windows = w;
            }
            if let Some(m_) = v.cnn_feature_maps {
                model.veracity.cnn_feature_maps = m_;
            }
        }
        if let Some(t) = file.train {
            if let Some(v) = t.mode {
                train.mode = parse_mode(&v)?;
            }
            if let Some(v) = t.lambda {
                train.lambda = v;
            }
            if let Some(v) = t.learning_rate {
                train.learning_rate = v;
            }
            if let Some(v) = t.batch_size {
                train.batch_size = v;
            }
            if let Some(v) = t.max_epochs {
                train.max_epochs = v;
            }
            if let Some(v) = t.dropout {
                train.dropout = v;
            }
            if let Some(v) = t.seed {
                train.seed = v;
            }
            train.grad_clip = match t.grad_clip {
                Some(c) if c <= 0.0 => None,
                Some(c) => Some(c),
                None => train.grad_clip,
            };
            if let Some(v) = t.patience {
                train.patience = Some(v);
            }
            if let Some(v) = t.select_best_dev {
                train.select_best_dev = v;
            }
        }
    }

    // Flags override everything.
    if let Some(mode) = &opts.mode {
        train.mode = parse_mode(mode)?;
    }
    if let Some(lambda) = opts.lambda {
        if lambda < 0.0 {
            return Err(CliError::usage(format!("lambda must be >= 0, got {lambda}")));
        }
        train.lambda = lambda;
    }
    if let Some(v) = &opts.gcn_variant {
        model.gcn.variant = parse_variant(v)?;
    }
    if let Some(r) = &opts.rnn {
        model.veracity.rnn_variant = parse_rnn(r)?;
    }
    if opts.no_stance_features {
        model.veracity.use_stance_features = false;
    }
    if let Some(e) = opts.epochs {
        train.max_epochs = e;
    }
    if let Some(lr) = opts.learning_rate {
        train.learning_rate = lr;
    }
    if let Some(d) = opts.dropout {
        train.dropout = d;
    }
    if let Some(b) = opts.batch_size {
        train.batch_size = b;
    }
    if let Some(seed) = opts.seed {
        train.seed = seed;
    } else if opts.config.is_none() || train.seed == TrainConfig::default().seed {
        if let Ok(env_seed) = std::env::var(SEED_ENV) {
            train.seed = env_seed
                .parse()
                .map_err(|_| CliError::usage(format!("bad {SEED_ENV} value {env_seed:?}")))?;
        }
    }

    model
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok((model, train))
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

fn parse_mode(s: &str) -> Result<TrainMode, CliError> {
    s.parse().map_err(CliError::usage)
}

fn parse_variant(s: &str) -> Result<GcnVariant, CliError> {
    s.parse().map_err(CliError::usage)
}

fn parse_rnn(s: &str) -> Result<RnnVariant, CliError> {
    s.parse().map_err(CliError::usage)
}
