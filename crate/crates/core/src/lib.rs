//! Rehabilitation exercise quality assessment from body-joint sequences.
//!
//! Recordings are augmented with horizontal flips and small rotations
//! (in image space through a pose backend, or directly on the joints),
//! reduced to exercise-specific per-frame features, and scored by a stacked
//! many-to-one LSTM regressor. Evaluation is k-fold cross-validation with
//! training-only augmentation and Spearman rank correlation.

pub mod augment;
pub mod config;
pub mod error;
pub mod evalcv;
pub mod features;
pub mod ingest;
pub mod manifest;
pub mod sample;
pub mod seed;
pub mod seqnet;
pub mod topology;

pub use error::{Error, Result};
pub use sample::{
    validate_sample, ExerciseId, FrameSize, LandmarkFrame, LandmarkPoint, LandmarkSequence,
    Provenance, QualityScore, Sample, Violation,
};
pub use topology::LandmarkTopology;
