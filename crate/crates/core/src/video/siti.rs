//! Per-frame spatial and temporal activity indices.

use ndarray::Array2;

use crate::error::{AvqError, Result};

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut count = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        count += 1;
        sum += v;
    }
    if count == 0 {
        return 0.0;
    }
    let mean = sum / count as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    var.sqrt()
}

/// Spatial index: population standard deviation of the Sobel gradient
/// magnitude over interior pixels. Frames with no interior (either dimension
/// below 3) have zero spatial activity by convention.
pub fn spatial_index(frame: &Array2<f64>) -> f64 {
    let (h, w) = frame.dim();
    if h < 3 || w < 3 {
        return 0.0;
    }
    let mut magnitudes = Vec::with_capacity((h - 2) * (w - 2));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let gx = frame[(r - 1, c + 1)] + 2.0 * frame[(r, c + 1)] + frame[(r + 1, c + 1)]
                - frame[(r - 1, c - 1)]
                - 2.0 * frame[(r, c - 1)]
                - frame[(r + 1, c - 1)];
            let gy = frame[(r + 1, c - 1)] + 2.0 * frame[(r + 1, c)] + frame[(r + 1, c + 1)]
                - frame[(r - 1, c - 1)]
                - 2.0 * frame[(r - 1, c)]
                - frame[(r - 1, c + 1)];
            magnitudes.push((gx * gx + gy * gy).sqrt());
        }
    }
    population_std(magnitudes.iter().cloned())
}

/// Temporal index: population standard deviation of the pixel-wise frame
/// difference. The first frame of a sequence has no predecessor and gets 0.
pub fn temporal_index(frame: &Array2<f64>, prev: &Array2<f64>) -> Result<f64> {
    if frame.dim() != prev.dim() {
        return Err(AvqError::dimension(
            "temporal index",
            prev.len(),
            frame.len(),
        ));
    }
    Ok(population_std(
        frame
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| a - b)
            .collect::<Vec<f64>>()
            .into_iter(),
    ))
}
