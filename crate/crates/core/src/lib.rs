//! Quantifying how expressive-speech latent spaces relate to interpretable acoustic
//! features: acoustic feature extraction, mutual information against style labels,
//! least-squares probing, 2-D reductions with feature gradient overlays, and a
//! synthetic corpus with planted ground truth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod dimred;
pub mod embeddings;
pub mod error;
pub mod features;
pub mod frames;
pub mod gradients;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
