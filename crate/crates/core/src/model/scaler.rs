//! Per-row feature scaling fitted on training data.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};
use crate::nn::autoencoder::first_nonfinite;

/// Lower clamp for min-max-scaled values outside the training range.
pub const MINMAX_CLAMP_LO: f64 = -0.5;
/// Upper clamp for min-max-scaled values outside the training range.
pub const MINMAX_CLAMP_HI: f64 = 1.5;

/// Scaling recipe applied to each feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerMode {
    /// Map the training range of each row onto [0, 1].
    #[default]
    Minmax01,
    /// Center each row and divide by its standard deviation.
    Zscore,
}

/// Per-row affine scaler. `offset` holds the row minimum (min-max) or mean
/// (z-score); `scale` holds the range or standard deviation. A zero entry in
/// `scale` marks a degenerate row, mapped to 0.5 (min-max) or 0 (z-score).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mode: ScalerMode,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    /// Fits per-row statistics on training columns.
    pub fn fit(mode: ScalerMode, data: &Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(AvqError::Validation(format!(
                "cannot fit a scaler on a {}x{} matrix",
                rows, cols
            )));
        }
        if let Some((r, c)) = first_nonfinite(data) {
            return Err(AvqError::NonFinite {
                location: format!("scaler fit input ({}, {})", r, c),
            });
        }

        let mut offset = Vec::with_capacity(rows);
        let mut scale = Vec::with_capacity(rows);
        for row in data.rows() {
            match mode {
                ScalerMode::Minmax01 => {
                    let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    offset.push(min);
                    scale.push(max - min);
                }
                ScalerMode::Zscore => {
                    let mean = row.sum() / cols as f64;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / cols as f64;
                    offset.push(mean);
                    scale.push(var.sqrt());
                }
            }
        }
        Ok(FeatureScaler {
            mode,
            offset,
            scale,
        })
    }

    pub fn rows(&self) -> usize {
        self.offset.len()
    }

    /// Row indices whose training data had zero range.
    pub fn degenerate_rows(&self) -> Vec<usize> {
        self.scale
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Scales each row. Min-max output is clamped to [-0.5, 1.5] so unseen
    /// data cannot push activations arbitrarily far outside the fit range.
    pub fn apply(&self, data: &Array2<f64>) -> Result<Array2<f64>> {
        if data.nrows() != self.rows() {
            return Err(AvqError::dimension(
                "scaler input rows",
                self.rows(),
                data.nrows(),
            ));
        }
        let mut out = data.clone();
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let (off, sc) = (self.offset[i], self.scale[i]);
            for v in row.iter_mut() {
                *v = match self.mode {
                    ScalerMode::Minmax01 => {
                        if sc == 0.0 {
                            0.5
                        } else {
                            ((*v - off) / sc).clamp(MINMAX_CLAMP_LO, MINMAX_CLAMP_HI)
                        }
                    }
                    ScalerMode::Zscore => {
                        if sc == 0.0 {
                            0.0
                        } else {
                            (*v - off) / sc
                        }
                    }
                };
            }
        }
        Ok(out)
    }
}
