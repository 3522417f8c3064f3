//! Mean-subtracted contrast normalization of luma planes.
//!
//! Each pixel is normalized by a local mean and deviation taken under a 7x7
//! Gaussian window, the standard first step for natural-scene-statistics
//! features.

use ndarray::Array2;
use once_cell::sync::Lazy;

use crate::error::{AvqError, Result};

/// Window half-width; the kernel covers KERNEL_SIZE = 2*KERNEL_RADIUS+1 taps.
pub const KERNEL_RADIUS: usize = 3;
pub const KERNEL_SIZE: usize = 7;

/// Gaussian sigma for the window, by NSS convention kernel_size / 6.
const SIGMA: f64 = KERNEL_SIZE as f64 / 6.0;

/// One-dimensional Gaussian taps normalized to sum 1; the separable product
/// then sums to 1 in 2-D as well.
static KERNEL_1D: Lazy<[f64; KERNEL_SIZE]> = Lazy::new(|| {
    let mut k = [0.0; KERNEL_SIZE];
    for (i, tap) in k.iter_mut().enumerate() {
        let d = i as f64 - KERNEL_RADIUS as f64;
        *tap = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    for tap in &mut k {
        *tap /= total;
    }
    k
});

/// Separable Gaussian blur with clamp-to-edge borders. Defined for any
/// non-empty plane; pixels beyond the border replicate the nearest edge.
fn gaussian_blur(plane: &Array2<f64>) -> Array2<f64> {
    let (h, w) = plane.dim();
    let k = &*KERNEL_1D;
    let mut tmp = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, tap) in k.iter().enumerate() {
                let cc = (c + t).saturating_sub(KERNEL_RADIUS).min(w - 1);
                acc += tap * plane[(r, cc)];
            }
            tmp[(r, c)] = acc;
        }
    }
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, tap) in k.iter().enumerate() {
                let rr = (r + t).saturating_sub(KERNEL_RADIUS).min(h - 1);
                acc += tap * tmp[(rr, c)];
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// Core transform without the size gate; used internally on downscaled
/// planes that may be smaller than the kernel.
pub(crate) fn mscn_core(plane: &Array2<f64>) -> Array2<f64> {
    let mu = gaussian_blur(plane);
    let squared = plane.mapv(|v| v * v);
    let mu2 = gaussian_blur(&squared);
    let mut out = Array2::zeros(plane.dim());
    for ((idx, v), m) in plane.indexed_iter().zip(mu.iter()) {
        let var = (mu2[idx] - m * m).max(0.0);
        out[idx] = (v - m) / (var.sqrt() + 1.0);
    }
    out
}

/// Normalizes a luma plane: (I - mu) / (sigma + 1) under the 7x7 Gaussian
/// window. The plane must be at least as large as the kernel.
pub fn mscn(plane: &Array2<f64>) -> Result<Array2<f64>> {
    let (h, w) = plane.dim();
    if h < KERNEL_SIZE || w < KERNEL_SIZE {
        return Err(AvqError::Validation(format!(
            "frame {}x{} is smaller than the {}x{} normalization window",
            w, h, KERNEL_SIZE, KERNEL_SIZE
        )));
    }
    Ok(mscn_core(plane))
}
