//! Moment-matching estimators for the generalized Gaussian distribution and
//! its asymmetric variant, used to summarize normalized-luma statistics.
//!
//! Both estimators match the moment ratio r(alpha) =
//! gamma(2/alpha)^2 / (gamma(1/alpha) gamma(3/alpha)), which is strictly
//! increasing in alpha, against a precomputed table over a fixed shape grid.

use libm::lgamma;
use once_cell::sync::Lazy;

use crate::error::{AvqError, Result};

pub const ALPHA_MIN: f64 = 0.2;
pub const ALPHA_MAX: f64 = 10.0;
pub const ALPHA_STEP: f64 = 0.001;

/// Minimum sample count for the public fitters.
pub const MIN_SAMPLES: usize = 100;

/// Symmetric fit result: shape and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdFit {
    pub alpha: f64,
    pub variance: f64,
}

/// Asymmetric fit result: shape, mean, and per-side variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdFit {
    pub alpha: f64,
    pub eta: f64,
    pub variance_left: f64,
    pub variance_right: f64,
}

fn gamma_fn(x: f64) -> f64 {
    lgamma(x).exp()
}

fn ratio(alpha: f64) -> f64 {
    (2.0 * lgamma(2.0 / alpha) - lgamma(1.0 / alpha) - lgamma(3.0 / alpha)).exp()
}

/// (alpha, r(alpha)) over the shape grid, r strictly increasing.
static RATIO_TABLE: Lazy<Vec<(f64, f64)>> = Lazy::new(|| {
    let steps = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize;
    (0..=steps)
        .map(|i| {
            let alpha = ALPHA_MIN + i as f64 * ALPHA_STEP;
            (alpha, ratio(alpha))
        })
        .collect()
});

/// Grid shape value whose moment ratio is closest to `rho`; clamps to the
/// grid ends when `rho` falls outside the covered range.
pub(crate) fn lookup_alpha(rho: f64) -> f64 {
    let table = &*RATIO_TABLE;
    let idx = table.partition_point(|(_, r)| *r < rho);
    if idx == 0 {
        return table[0].0;
    }
    if idx >= table.len() {
        return table[table.len() - 1].0;
    }
    let (lo_alpha, lo_r) = table[idx - 1];
    let (hi_alpha, hi_r) = table[idx];
    if (rho - lo_r).abs() <= (hi_r - rho).abs() {
        lo_alpha
    } else {
        hi_alpha
    }
}

/// Core symmetric fit without the sample-count gate. Degenerate input (too
/// few samples or zero spread) falls back to a Gaussian shape with zero
/// variance so per-frame extraction never aborts on flat regions.
pub(crate) fn ggd_core(samples: &[f64]) -> GgdFit {
    let n = samples.len();
    if n < 2 {
        return GgdFit {
            alpha: 2.0,
            variance: 0.0,
        };
    }
    let nf = n as f64;
    let mean_abs = samples.iter().map(|v| v.abs()).sum::<f64>() / nf;
    let mean_sq = samples.iter().map(|v| v * v).sum::<f64>() / nf;
    let mean = samples.iter().sum::<f64>() / nf;
    let variance = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
    if mean_sq <= 0.0 || variance <= 0.0 {
        return GgdFit {
            alpha: 2.0,
            variance: 0.0,
        };
    }
    let rho = mean_abs * mean_abs / mean_sq;
    GgdFit {
        alpha: lookup_alpha(rho),
        variance,
    }
}

/// Fits a symmetric generalized Gaussian by moment matching: the shape
/// solves r(alpha) = (E|x|)^2 / E[x^2] on the grid, the variance is the
/// population variance of the samples.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(AvqError::Validation(format!(
            "ggd fit needs at least {} samples, got {}",
            MIN_SAMPLES,
            samples.len()
        )));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let variance = samples
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / samples.len() as f64;
    if variance <= 0.0 {
        return Err(AvqError::DegenerateInput(
            "ggd fit on zero-variance samples".into(),
        ));
    }
    Ok(ggd_core(samples))
}

/// Core asymmetric fit without the sample-count gate. An empty side gets
/// zero side-variance; all-zero input falls back to a symmetric Gaussian
/// shape.
pub(crate) fn aggd_core(samples: &[f64]) -> AggdFit {
    let mut left_sq = 0.0;
    let mut left_count = 0usize;
    let mut right_sq = 0.0;
    let mut right_count = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for &v in samples {
        abs_sum += v.abs();
        sq_sum += v * v;
        if v < 0.0 {
            left_sq += v * v;
            left_count += 1;
        } else if v > 0.0 {
            right_sq += v * v;
            right_count += 1;
        }
    }
    let n = samples.len().max(1) as f64;
    let variance_left = if left_count > 0 {
        left_sq / left_count as f64
    } else {
        0.0
    };
    let variance_right = if right_count > 0 {
        right_sq / right_count as f64
    } else {
        0.0
    };
    if sq_sum <= 0.0 {
        return AggdFit {
            alpha: 2.0,
            eta: 0.0,
            variance_left,
            variance_right,
        };
    }
    let sigma_left = variance_left.sqrt();
    let sigma_right = variance_right.sqrt();
    let gamma_hat = if sigma_right > 0.0 {
        sigma_left / sigma_right
    } else {
        1e6
    };
    let r_hat = (abs_sum / n) * (abs_sum / n) / (sq_sum / n);
    let g2 = gamma_hat * gamma_hat;
    let big_r = r_hat * (gamma_hat * g2 + 1.0) * (gamma_hat + 1.0) / ((g2 + 1.0) * (g2 + 1.0));
    let alpha = lookup_alpha(big_r);
    let side_scale = (gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha)).sqrt();
    let b_left = sigma_left * side_scale;
    let b_right = sigma_right * side_scale;
    let eta = (b_right - b_left) * gamma_fn(2.0 / alpha) / gamma_fn(1.0 / alpha);
    AggdFit {
        alpha,
        eta,
        variance_left,
        variance_right,
    }
}

/// Fits an asymmetric generalized Gaussian over the negative and positive
/// halves of the samples. At least one half must carry `MIN_SAMPLES` points;
/// a one-sided sample is legal and yields zero variance on the empty side.
pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    let left = samples.iter().filter(|v| **v < 0.0).count();
    let right = samples.iter().filter(|v| **v > 0.0).count();
    if left < MIN_SAMPLES && right < MIN_SAMPLES {
        return Err(AvqError::Validation(format!(
            "aggd fit needs {} samples on a side, got {} negative and {} positive",
            MIN_SAMPLES, left, right
        )));
    }
    Ok(aggd_core(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_samples(n: usize, seed: u64) -> Vec<f64> {
        // Box-Muller from the seeded stream
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect()
    }

    #[test]
    fn ratio_table_is_strictly_increasing() {
        let table = &*RATIO_TABLE;
        assert_eq!(table.len(), 9801);
        for pair in table.windows(2) {
            assert!(pair[0].1 < pair[1].1);
        }
        assert!((table[0].0 - ALPHA_MIN).abs() < 1e-12);
        assert!((table[table.len() - 1].0 - ALPHA_MAX).abs() < 1e-9);
    }

    #[test]
    fn lookup_inverts_ratio_on_grid_points() {
        for alpha in [0.5, 1.0, 2.0, 3.5, 7.25] {
            assert!((lookup_alpha(ratio(alpha)) - alpha).abs() < 1e-9);
        }
        // clamping beyond the grid
        assert_eq!(lookup_alpha(0.0), ALPHA_MIN);
        assert_eq!(lookup_alpha(1.0), ALPHA_MAX);
    }

    #[test]
    fn gaussian_samples_fit_near_two() {
        let fit = fit_ggd(&gaussian_samples(1_000_000, 1)).unwrap();
        assert!(
            fit.alpha > 1.9 && fit.alpha < 2.1,
            "alpha = {}",
            fit.alpha
        );
        assert!((fit.variance - 1.0).abs() < 0.01);
    }

    #[test]
    fn laplacian_samples_fit_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let u: f64 = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).max(1e-300).ln()
            })
            .collect();
        let fit = fit_ggd(&samples).unwrap();
        assert!(
            fit.alpha > 0.9 && fit.alpha < 1.1,
            "alpha = {}",
            fit.alpha
        );
    }

    #[test]
    fn constant_vector_rejected() {
        let samples = vec![3.0; 500];
        assert!(matches!(
            fit_ggd(&samples),
            Err(AvqError::DegenerateInput(_))
        ));
    }

    #[test]
    fn short_vector_rejected() {
        let samples = vec![0.0, 1.0, -1.0];
        assert!(fit_ggd(&samples).is_err());
    }

    #[test]
    fn symmetric_samples_give_balanced_sides() {
        let fit = fit_aggd(&gaussian_samples(1_000_000, 3)).unwrap();
        let ratio = fit.variance_left / fit.variance_right;
        assert!(ratio > 0.9 && ratio < 1.1, "ratio = {}", ratio);
        assert!(fit.eta.abs() < 0.02, "eta = {}", fit.eta);
    }

    #[test]
    fn half_gaussian_is_one_sided() {
        let samples: Vec<f64> = gaussian_samples(1_000_000, 4)
            .into_iter()
            .map(f64::abs)
            .collect();
        let fit = fit_aggd(&samples).unwrap();
        assert_eq!(fit.variance_left, 0.0);
        assert!(fit.eta > 0.0, "eta = {}", fit.eta);
    }

    #[test]
    fn mirroring_swaps_sides_and_negates_eta() {
        let samples = gaussian_samples(5000, 5);
        let mirrored: Vec<f64> = samples.iter().map(|v| -v).collect();
        let a = fit_aggd(&samples).unwrap();
        let b = fit_aggd(&mirrored).unwrap();
        assert_eq!(a.variance_left, b.variance_right);
        assert_eq!(a.variance_right, b.variance_left);
        assert!((a.eta + b.eta).abs() < 1e-9, "{} vs {}", a.eta, b.eta);
    }

    #[test]
    fn both_sides_sparse_rejected() {
        let samples = vec![-1.0, 2.0, -3.0, 4.0];
        assert!(fit_aggd(&samples).is_err());
    }
}
