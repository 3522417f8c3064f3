//! Deterministic k-fold splitting at sequence level.

use crate::error::{AvqError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Splits `n` items into `k` disjoint test folds: seeded shuffle followed by
/// a contiguous partition. Fold sizes differ by at most one (the first
/// `n % k` folds take the extra item).
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(AvqError::Validation("kfold: k must be >= 1".into()));
    }
    if k > n {
        return Err(AvqError::Validation(format!(
            "kfold: k={} exceeds number of sequences {}",
            k, n
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}
