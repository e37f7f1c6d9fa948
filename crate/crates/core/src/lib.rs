//! Prompt-based multi-interest sequential recommendation.
//!
//! Each user is represented by the most recent `M` items they interacted
//! with. Two banks of learnable prompt embeddings are prepended to that
//! window: one feeds the multi-interest *extractor*, which soft-clusters the
//! window into `K` interests and describes each one by its attention-weighted
//! mean (centrality) plus a multiple of its attention-weighted standard
//! deviation (dispersion); the other feeds the *aggregator*, which predicts a
//! weight per interest and fuses them into one user embedding. Items are
//! ranked by dot product against that embedding and the whole network is
//! trained with a pairwise (BPR) ranking loss.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! anything touching the OS live in the `pomrec` companion crate.
//!
//! Layout:
//!
//! - [`numerics`]: dense matrices, a reverse-mode gradient tape over the
//!   handful of primitives the network uses, and an Adam optimizer.
//! - [`model`]: configuration, parameters and the forward graph.
//! - [`data`]: interaction parsing, leave-one-out splits and sampling.
//! - [`training`]: BPR loss, epochs, early stopping and resumable fitting.
//! - [`eval`]: candidate ranking and Recall@N / NDCG@N.
//! - [`synth`]: planted multi-interest worlds for desk-scale verification.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod synth;
pub mod training;

mod seed;

pub use data::{InteractionStore, ItemId, Split, UserId};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalOptions, MetricsReport};
pub use model::{ModelConfig, ModelParams, Variant};
pub use numerics::DenseMatrix;
pub use seed::derive_seed;
pub use training::{fit, TrainConfig};
