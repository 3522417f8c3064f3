//! No-reference audio-visual quality assessment.
//!
//! The library turns a media sequence (raw video plus PCM audio) into a
//! per-frame feature matrix, compresses it with a stack of sparse
//! autoencoders, and maps the bottleneck codes to a quality score with a
//! softmax or support-vector head. Evaluation helpers cover k-fold
//! cross-validation and the usual correlation metrics, and the ablation
//! runner executes whole grids of model variants against one dataset.

pub mod ablate;
pub mod audio;
pub mod error;
pub mod eval;
pub mod features;
pub mod heads;
pub mod media;
pub mod model;
pub mod nn;
pub mod video;

pub use error::{AvqError, Result};
