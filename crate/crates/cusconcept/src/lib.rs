//! Decompose a single image into an object concept and attribute concepts
//! along user-specified axes, producing reusable prompt-token embeddings,
//! explicit vocabulary predictions, and a benchmark harness.
//!
//! The pipeline has two training stages. Stage one builds per-axis word
//! vocabularies, learns a projection MLP per axis that scores each word, and
//! aggregates the top-scored word embeddings into concept centroids. Stage
//! two binds those centroids to placeholder tokens and refines all of them
//! jointly under the frozen diffusion model's denoising loss. Everything the
//! two stages touch is exercised against a tiny deterministic CPU backend;
//! a pretrained checkpoint can be wired in through the same contracts.

pub mod cli;
pub mod conditioning;
pub mod config;
pub mod diffusion;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod features;
pub mod generation;
pub mod image_io;
pub mod logging;
pub mod math;
pub mod optim;
pub mod pipeline;
pub mod stage1;
pub mod stage2;
pub mod vocab;

pub use error::{Error, Result};
