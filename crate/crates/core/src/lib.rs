//! Dialect classification experiment toolkit.
//!
//! Covers the full experiment pipeline: corpus ingestion and 10 s
//! segmentation, segment-removal and frequency-masking augmentation, checks
//! on externally voice-converted audio, segment embeddings, a small
//! feedforward classifier, repeated speaker-disjoint evaluation with
//! Mann-Whitney U comparisons, and pitch/formant/embedding drift analysis.

pub mod acoustics;
pub mod augment;
pub mod classifier;
pub mod conversion;
pub mod corpus;
pub mod dsp;
pub mod embed;
mod error;
pub mod experiment;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
