//! Joint stance classification and rumor veracity prediction over
//! tree-structured social-media conversations.
//!
//! The crate is organized bottom-up:
//!
//! - [`conversation`] and [`adjacency`]: reply trees and their normalized
//!   adjacency matrices.
//! - [`tensor`], [`autodiff`] and [`nn`]: a small f64 reverse-mode kernel
//!   substrate (GRU, dropout, losses, Adam, gradient checking).
//! - [`corpus`] and [`synth`]: the JSONL corpus format, cross-validation
//!   folds, statistics and a synthetic corpus generator with planted
//!   stance dynamics.
//! - [`text`] and [`model`]: tokenization, embeddings and the two-component
//!   model (graph-convolutional stance classifier feeding a stance-aware
//!   recurrent veracity predictor).
//! - [`train`]: joint optimization, checkpointing, fold runners.
//! - [`metrics`], [`eval`] and [`svg`]: macro-F1 scoring, depth-bucketed
//!   analysis, lambda sweeps, stance-over-time curves and report emission.

pub mod adjacency;
pub mod autodiff;
pub mod conversation;
pub mod corpus;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod svg;
pub mod synth;
pub mod tensor;
pub mod text;
pub mod train;

pub use adjacency::{normalize, AdjacencyMatrix, GcnVariant, NormalizedAdjacency};
pub use conversation::{
    build_tree, chronological_order, depth_of, ConversationThread, Stance, ThreadTree, Tweet,
    Veracity,
};
pub use corpus::{Corpus, Fold, FoldPlan, FoldScheme};
pub use model::{GcnConfig, Model, ModelConfig, RnnVariant, VeracityConfig};
pub use nn::{adam_step, gradient_check, AdamState, ParameterSet};
pub use synth::SyntheticSpec;
pub use tensor::Tensor;
pub use train::{train, TrainConfig, TrainLog, TrainMode};
