//! Correlation and error measures: Pearson, Spearman, RMSE.

use crate::error::{AvqError, Result};

/// Sample Pearson correlation coefficient.
///
/// Requires at least 3 points and nonconstant inputs.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(AvqError::dimension("pearson", x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AvqError::Validation(format!(
            "pearson needs at least 3 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AvqError::DegenerateInput(
            "pearson: constant input has undefined correlation".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
/// Ties receive the mean of the ranks they span.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(AvqError::dimension("spearman", x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AvqError::Validation(format!(
            "spearman needs at least 3 points, got {}",
            x.len()
        )));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    pearson(&rx, &ry).map_err(|e| match e {
        AvqError::DegenerateInput(_) => AvqError::DegenerateInput(
            "spearman: constant ranks have undefined correlation".into(),
        ),
        other => other,
    })
}

/// Average (fractional) ranks, 1-based; tied values share the mean rank of
/// the positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("NaN in ranks"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold equal values; mean 1-based rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Root mean square error between two equal-length vectors.
pub fn rmse(pred: &[f64], mos: &[f64]) -> Result<f64> {
    if pred.len() != mos.len() {
        return Err(AvqError::dimension("rmse", pred.len(), mos.len()));
    }
    if pred.is_empty() {
        return Err(AvqError::Validation("rmse needs at least 1 point".into()));
    }
    let ss: f64 = pred
        .iter()
        .zip(mos)
        .map(|(&p, &m)| (p - m) * (p - m))
        .sum();
    Ok((ss / pred.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pearson_perfect_linear() {
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_computed() {
        // cov = 4/ n, sxx = syy = 5 => r = 4/5
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_errors() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn pearson_affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            let r0 = pearson(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| 3.5 * v + 11.0).collect();
            let r1 = pearson(&xs, &y).unwrap();
            assert!((r0 - r1).abs() < 1e-12);
            let xn: Vec<f64> = x.iter().map(|v| -2.0 * v + 1.0).collect();
            let r2 = pearson(&xn, &y).unwrap();
            assert!((r0 + r2).abs() < 1e-12);
        }
    }

    #[test]
    fn spearman_monotone_transform() {
        let x = vec![0.3, 1.2, 2.0, 5.5, 9.1];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        // invariant under strictly monotone transform of one argument
        let z = vec![4.0, 1.0, 3.0, 2.0, 5.0];
        let r0 = spearman(&x, &z).unwrap();
        let zt: Vec<f64> = z.iter().map(|v| v.powi(3) + 2.0).collect();
        let r1 = spearman(&x, &zt).unwrap();
        assert!((r0 - r1).abs() < 1e-12);
    }

    #[test]
    fn spearman_hand_computed() {
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn spearman_all_ties_errors() {
        assert!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        // values 10, 20, 20, 30 -> ranks 1, 2.5, 2.5, 4
        let r = average_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn rmse_hand_computed() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let r = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rmse_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        }
    }

    #[test]
    fn rmse_length_mismatch() {
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
