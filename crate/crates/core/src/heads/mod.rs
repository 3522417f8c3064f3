//! Quality heads: map low-dimensional feature columns to scores in [1, 5].
//!
//! Two heads are provided. The softmax head classifies each column into one
//! of `Q` quality classes and converts the posterior into a continuous score;
//! the support-vector head regresses the score directly.

pub mod softmax;
pub mod svr;

pub use softmax::{one_hot, train_softmax, SoftmaxHead, SoftmaxTrainConfig};
pub use svr::{train_svr, SvrHead, SvrParams};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};

pub const SCORE_MIN: f64 = 1.0;
pub const SCORE_MAX: f64 = 5.0;

/// How a class posterior becomes a continuous score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Probability-weighted mean of the class centers.
    #[default]
    Expectation,
    /// Center of the most probable class.
    Argmax,
}

/// A trained head of either kind.
#[derive(Debug, Clone)]
pub enum QualityHead {
    Softmax(SoftmaxHead),
    Svr(SvrHead),
}

impl QualityHead {
    pub fn input_dim(&self) -> usize {
        match self {
            QualityHead::Softmax(h) => h.input_dim(),
            QualityHead::Svr(h) => h.input_dim(),
        }
    }
}

/// Maps a subjective score onto one of `q` equal-width bins over [1, 5].
/// Every bin is half-open except the last, which includes 5.0.
pub fn mos_to_class(mos: f64, q: usize) -> Result<usize> {
    if q < 2 {
        return Err(AvqError::Validation(format!(
            "need at least 2 quality classes, got {}",
            q
        )));
    }
    if !mos.is_finite() || !(SCORE_MIN..=SCORE_MAX).contains(&mos) {
        return Err(AvqError::Validation(format!(
            "subjective score {} outside [{}, {}]",
            mos, SCORE_MIN, SCORE_MAX
        )));
    }
    let width = (SCORE_MAX - SCORE_MIN) / q as f64;
    let idx = ((mos - SCORE_MIN) / width).floor() as usize;
    Ok(idx.min(q - 1))
}

/// Midpoints of the `q` equal-width bins over [1, 5].
pub fn class_centers(q: usize) -> Vec<f64> {
    let width = (SCORE_MAX - SCORE_MIN) / q as f64;
    (0..q)
        .map(|i| SCORE_MIN + (i as f64 + 0.5) * width)
        .collect()
}

/// Expected class center under the posterior `p`, clamped to [1, 5].
pub fn posterior_to_score(p: &[f64], centers: &[f64]) -> Result<f64> {
    if p.len() != centers.len() {
        return Err(AvqError::dimension(
            "posterior_to_score",
            centers.len(),
            p.len(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(AvqError::Validation(format!(
            "posterior sums to {}, not 1",
            total
        )));
    }
    let score: f64 = p.iter().zip(centers).map(|(pi, ci)| pi * ci).sum();
    Ok(score.clamp(SCORE_MIN, SCORE_MAX))
}

/// Per-column scores for the d-by-n feature matrix `f`, always in [1, 5].
pub fn predict_head(head: &QualityHead, f: &Array2<f64>) -> Result<Vec<f64>> {
    match head {
        QualityHead::Softmax(h) => h.predict(f),
        QualityHead::Svr(h) => Ok(h
            .regress(f)?
            .into_iter()
            .map(|s| s.clamp(SCORE_MIN, SCORE_MAX))
            .collect()),
    }
}
