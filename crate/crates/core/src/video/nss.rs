//! Per-frame natural-scene-statistics descriptor.
//!
//! The 88 features concatenate, in this order:
//! - for each of 4 dyadic scales (full, 1/2, 1/4, 1/8 by 2x2 mean pooling):
//!   GGD shape/variance of the normalized luma (2) and AGGD shape/mean/side
//!   variances of the four paired products H, V, D1, D2 (16), 18 per scale;
//! - for the first 2 scales: GGD shape/variance of the four log-derivative
//!   maps of log(|normalized luma| + 0.1), 8 per scale.

use ndarray::Array2;

use crate::error::{AvqError, Result};
use crate::video::ggd::{aggd_core, ggd_core};
use crate::video::mscn::mscn_core;

/// Length of the descriptor.
pub const NSS_DIM: usize = 88;

/// Scales entering the paired-product block.
const PRODUCT_SCALES: usize = 4;
/// Scales entering the log-derivative block.
const LOG_DERIV_SCALES: usize = 2;

const MIN_FRAME_DIM: usize = 32;

/// Stabilizer inside the log-derivative transform.
const LOG_STABILIZER: f64 = 0.1;

/// 2x2 mean pooling with floor dimensions; a trailing odd row or column is
/// dropped.
pub fn pool2x2(plane: &Array2<f64>) -> Array2<f64> {
    let (h, w) = plane.dim();
    let (h2, w2) = (h / 2, w / 2);
    Array2::from_shape_fn((h2, w2), |(r, c)| {
        (plane[(2 * r, 2 * c)]
            + plane[(2 * r, 2 * c + 1)]
            + plane[(2 * r + 1, 2 * c)]
            + plane[(2 * r + 1, 2 * c + 1)])
            / 4.0
    })
}

/// Products of horizontally, vertically, and diagonally adjacent values,
/// in the order H, V, D1 (main diagonal), D2 (anti-diagonal).
pub fn paired_products(m: &Array2<f64>) -> [Array2<f64>; 4] {
    let (h, w) = m.dim();
    let horizontal = Array2::from_shape_fn((h, w - 1), |(r, c)| m[(r, c)] * m[(r, c + 1)]);
    let vertical = Array2::from_shape_fn((h - 1, w), |(r, c)| m[(r, c)] * m[(r + 1, c)]);
    let diag_main = Array2::from_shape_fn((h - 1, w - 1), |(r, c)| m[(r, c)] * m[(r + 1, c + 1)]);
    let diag_anti = Array2::from_shape_fn((h - 1, w - 1), |(r, c)| m[(r, c + 1)] * m[(r + 1, c)]);
    [horizontal, vertical, diag_main, diag_anti]
}

/// Directional differences of log(|m| + 0.1), same direction order as
/// `paired_products`.
pub fn log_derivative_maps(m: &Array2<f64>) -> [Array2<f64>; 4] {
    let lm = m.mapv(|v| (v.abs() + LOG_STABILIZER).ln());
    let (h, w) = lm.dim();
    let horizontal = Array2::from_shape_fn((h, w - 1), |(r, c)| lm[(r, c + 1)] - lm[(r, c)]);
    let vertical = Array2::from_shape_fn((h - 1, w), |(r, c)| lm[(r + 1, c)] - lm[(r, c)]);
    let diag_main = Array2::from_shape_fn((h - 1, w - 1), |(r, c)| lm[(r + 1, c + 1)] - lm[(r, c)]);
    let diag_anti = Array2::from_shape_fn((h - 1, w - 1), |(r, c)| lm[(r + 1, c)] - lm[(r, c + 1)]);
    [horizontal, vertical, diag_main, diag_anti]
}

const DIRECTIONS: [&str; 4] = ["h", "v", "d1", "d2"];

/// The 88 descriptor labels, in output order.
pub fn nss_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(NSS_DIM);
    for s in 0..PRODUCT_SCALES {
        names.push(format!("s{}_mscn_alpha", s));
        names.push(format!("s{}_mscn_var", s));
        for dir in DIRECTIONS {
            names.push(format!("s{}_{}_alpha", s, dir));
            names.push(format!("s{}_{}_eta", s, dir));
            names.push(format!("s{}_{}_lvar", s, dir));
            names.push(format!("s{}_{}_rvar", s, dir));
        }
    }
    for s in 0..LOG_DERIV_SCALES {
        for dir in DIRECTIONS {
            names.push(format!("s{}_logd_{}_alpha", s, dir));
            names.push(format!("s{}_logd_{}_var", s, dir));
        }
    }
    names
}

/// Computes the 88-dimensional descriptor of one luma plane.
pub fn nss_features(frame: &Array2<f64>) -> Result<Vec<f64>> {
    let (h, w) = frame.dim();
    if h < MIN_FRAME_DIM || w < MIN_FRAME_DIM {
        return Err(AvqError::Validation(format!(
            "nss features need at least {}x{} pixels, got {}x{}",
            MIN_FRAME_DIM, MIN_FRAME_DIM, w, h
        )));
    }
    let mut product_block = Vec::with_capacity(PRODUCT_SCALES * 18);
    let mut log_block = Vec::with_capacity(LOG_DERIV_SCALES * 8);
    let mut plane = frame.clone();
    for s in 0..PRODUCT_SCALES {
        let m = mscn_core(&plane);
        let flat: Vec<f64> = m.iter().cloned().collect();
        let g = ggd_core(&flat);
        product_block.push(g.alpha);
        product_block.push(g.variance);
        for product in paired_products(&m) {
            let flat: Vec<f64> = product.iter().cloned().collect();
            let a = aggd_core(&flat);
            product_block.push(a.alpha);
            product_block.push(a.eta);
            product_block.push(a.variance_left);
            product_block.push(a.variance_right);
        }
        if s < LOG_DERIV_SCALES {
            for map in log_derivative_maps(&m) {
                let flat: Vec<f64> = map.iter().cloned().collect();
                let g = ggd_core(&flat);
                log_block.push(g.alpha);
                log_block.push(g.variance);
            }
        }
        if s + 1 < PRODUCT_SCALES {
            plane = pool2x2(&plane);
        }
    }
    let mut out = product_block;
    out.extend(log_block);
    debug_assert_eq!(out.len(), NSS_DIM);
    Ok(out)
}
