//! Sentence-level medical text classification.
//!
//! The crate covers the whole pipeline: corpus ingestion and tokenization,
//! word and sentence embedding training, the three feature encoders used by
//! the shallow baselines, a small differentiable kernel library, the text
//! CNN and logistic-regression models, and the command harness behind the
//! `medtext` binary.

pub mod corpus;
pub mod embeddings;
pub mod encoders;
pub mod error;
pub mod format;
pub mod harness;
pub mod models;
pub mod neural;
pub mod rng;

pub use error::{Error, Result};
