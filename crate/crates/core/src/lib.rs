//! Seed-guided weakly supervised multi-label theme classification for short
//! free-text comments, with evaluation and inter-annotator agreement tools.
//!
//! Numeric code is generic over [`scalar::Real`]; the aliases below fix the
//! scalar to `f64`.

pub mod corpus;
pub mod embeddings;
pub mod engines;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod pipeline;
pub mod run;
pub mod scalar;
pub mod synth;
pub mod themes;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ScoreVector = labeling::ScoreVector<f64>;
pub type PredictionSet = labeling::PredictionSet<f64>;
pub type TfIdfMatrix = corpus::TfIdfMatrix<f64>;
pub type PreparedCorpus = pipeline::PreparedCorpus<f64>;
