//! Epsilon support-vector regression head with an RBF kernel.
//!
//! The dual problem is solved by sequential minimal optimization over the
//! usual 2n-variable formulation (one variable pair per training column),
//! picking the maximally violating pair each step and stopping at a KKT
//! residual below the tolerance. Kernel rows are computed lazily and kept in
//! a bounded cache.

use ndarray::{Array2, Axis};

use crate::error::{AvqError, Result};
use crate::nn::autoencoder::first_nonfinite;

/// Numerical floor for the curvature of a working pair.
const TAU: f64 = 1e-12;

/// Memory budget for cached kernel rows.
const CACHE_BYTES: usize = 64 << 20;

/// Hyperparameters for `train_svr`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams {
    /// Box constraint on the dual coefficients.
    pub c: f64,
    /// Half-width of the insensitive tube.
    pub epsilon: f64,
    /// RBF width; `None` picks 1 / (d * var(F)).
    pub gamma: Option<f64>,
    /// KKT stopping tolerance.
    pub tolerance: f64,
    /// Hard cap on pair updates before giving up.
    pub max_pair_updates: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            tolerance: 1e-3,
            max_pair_updates: 100_000,
        }
    }
}

impl SvrParams {
    pub fn validate(&self) -> Result<()> {
        if self.c <= 0.0 {
            return Err(AvqError::Validation("C must be > 0".into()));
        }
        if self.epsilon < 0.0 {
            return Err(AvqError::Validation("epsilon must be >= 0".into()));
        }
        if let Some(g) = self.gamma {
            if g <= 0.0 {
                return Err(AvqError::Validation("gamma must be > 0".into()));
            }
        }
        if self.tolerance <= 0.0 {
            return Err(AvqError::Validation("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// A trained regression head: support vectors, their dual coefficients, and
/// the bias. Prediction is sum(coeff_i * K(sv_i, x)) + bias.
#[derive(Debug, Clone)]
pub struct SvrHead {
    /// d-by-nsv matrix, one support vector per column.
    pub support_vectors: Array2<f64>,
    /// alpha - alpha*, one per support vector, each in [-C, C].
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
}

impl SvrHead {
    pub fn input_dim(&self) -> usize {
        self.support_vectors.nrows()
    }

    /// Raw regression values for each column of `f`, without clamping.
    pub fn regress(&self, f: &Array2<f64>) -> Result<Vec<f64>> {
        if f.nrows() != self.input_dim() {
            return Err(AvqError::dimension("svr input", self.input_dim(), f.nrows()));
        }
        let out = f
            .axis_iter(Axis(1))
            .map(|x| {
                let mut acc = self.bias;
                for (sv, coef) in self
                    .support_vectors
                    .axis_iter(Axis(1))
                    .zip(&self.coefficients)
                {
                    let dist2: f64 = sv.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    acc += coef * (-self.gamma * dist2).exp();
                }
                acc
            })
            .collect();
        Ok(out)
    }
}

/// Lazily computed kernel rows with least-recently-used eviction.
struct RowCache<'a> {
    f: &'a Array2<f64>,
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    stamp: Vec<u64>,
    clock: u64,
    resident: usize,
    cap: usize,
}

impl<'a> RowCache<'a> {
    fn new(f: &'a Array2<f64>, gamma: f64) -> Self {
        let n = f.ncols();
        let cap = (CACHE_BYTES / (8 * n.max(1))).max(16);
        RowCache {
            f,
            gamma,
            rows: vec![None; n],
            stamp: vec![0; n],
            clock: 0,
            resident: 0,
            cap,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        self.clock += 1;
        self.stamp[i] = self.clock;
        if self.rows[i].is_none() {
            if self.resident >= self.cap {
                let victim = (0..self.rows.len())
                    .filter(|&t| self.rows[t].is_some())
                    .min_by_key(|&t| self.stamp[t])
                    .expect("cache at capacity must hold a row");
                self.rows[victim] = None;
                self.resident -= 1;
            }
            let xi = self.f.column(i);
            let row: Vec<f64> = self
                .f
                .axis_iter(Axis(1))
                .map(|xj| {
                    let dist2: f64 =
                        xi.iter().zip(xj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-self.gamma * dist2).exp()
                })
                .collect();
            self.rows[i] = Some(row);
            self.resident += 1;
        }
        self.rows[i].as_ref().unwrap().as_slice()
    }
}

#[inline]
fn aug_sign(s: usize, n: usize) -> f64 {
    if s < n {
        1.0
    } else {
        -1.0
    }
}

/// Trains an epsilon-SVR on the d-by-n features `f` against `targets`.
pub fn train_svr(f: &Array2<f64>, targets: &[f64], params: &SvrParams) -> Result<SvrHead> {
    params.validate()?;
    let (d, n) = (f.nrows(), f.ncols());
    if n < 2 {
        return Err(AvqError::Validation(format!(
            "svr training needs at least 2 samples, got {}",
            n
        )));
    }
    if targets.len() != n {
        return Err(AvqError::dimension("svr targets", n, targets.len()));
    }
    if let Some((r, c)) = first_nonfinite(f) {
        return Err(AvqError::NonFinite {
            location: format!("svr training input ({}, {})", r, c),
        });
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return Err(AvqError::NonFinite {
            location: format!("svr target {}", i),
        });
    }

    let gamma = match params.gamma {
        Some(g) => g,
        None => {
            let len = (d * n) as f64;
            let mean = f.iter().sum::<f64>() / len;
            let var = f.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
            if var > 0.0 {
                1.0 / (d as f64 * var)
            } else {
                1.0 / d as f64
            }
        }
    };

    let c = params.c;
    let two_n = 2 * n;
    let mut alpha = vec![0.0f64; two_n];
    // gradient of the dual objective; starts at the linear term
    let mut grad: Vec<f64> = (0..two_n)
        .map(|s| {
            if s < n {
                params.epsilon - targets[s]
            } else {
                params.epsilon + targets[s - n]
            }
        })
        .collect();

    let mut cache = RowCache::new(f, gamma);
    let mut iterations = 0usize;
    let (mut m_val, mut big_m_val);
    loop {
        // maximal violating pair over the augmented index set
        m_val = f64::NEG_INFINITY;
        big_m_val = f64::INFINITY;
        let mut i_sel = usize::MAX;
        let mut j_sel = usize::MAX;
        for s in 0..two_n {
            let y = aug_sign(s, n);
            let v = -y * grad[s];
            let in_up = (y > 0.0 && alpha[s] < c) || (y < 0.0 && alpha[s] > 0.0);
            let in_low = (y > 0.0 && alpha[s] > 0.0) || (y < 0.0 && alpha[s] < c);
            if in_up && v > m_val {
                m_val = v;
                i_sel = s;
            }
            if in_low && v < big_m_val {
                big_m_val = v;
                j_sel = s;
            }
        }
        if m_val - big_m_val <= params.tolerance {
            break;
        }
        if iterations >= params.max_pair_updates {
            return Err(AvqError::Convergence {
                iterations,
                residual: m_val - big_m_val,
                tolerance: params.tolerance,
            });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let yi = aug_sign(i, n);
        let yj = aug_sign(j, n);
        let (bi, bj) = (i % n, j % n);
        let kii = cache.row(bi)[bi];
        let kjj = cache.row(bj)[bj];
        let kij = cache.row(bi)[bj];
        let quad = (kii + kjj - 2.0 * kij).max(TAU);

        let old_ai = alpha[i];
        let old_aj = alpha[j];
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = old_ai - old_aj;
            alpha[i] = old_ai + delta;
            alpha[j] = old_aj + delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = old_ai + old_aj;
            alpha[i] = old_ai - delta;
            alpha[j] = old_aj + delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        if dai == 0.0 && daj == 0.0 {
            // the pair is stuck on the box boundary; numerically converged
            break;
        }
        if dai != 0.0 {
            let row_i = cache.row(bi);
            for (t, g) in grad.iter_mut().enumerate() {
                *g += aug_sign(t, n) * yi * row_i[t % n] * dai;
            }
        }
        if daj != 0.0 {
            let row_j = cache.row(bj);
            for (t, g) in grad.iter_mut().enumerate() {
                *g += aug_sign(t, n) * yj * row_j[t % n] * daj;
            }
        }
    }

    // bias from the free variables when any exist, else the midpoint of the
    // feasible interval
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for s in 0..two_n {
        if alpha[s] > 0.0 && alpha[s] < c {
            free_sum += -aug_sign(s, n) * grad[s];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (m_val + big_m_val) / 2.0
    };

    let mut sv_cols = Vec::new();
    let mut coefficients = Vec::new();
    for t in 0..n {
        let coef = alpha[t] - alpha[t + n];
        if coef != 0.0 {
            sv_cols.push(t);
            coefficients.push(coef);
        }
    }
    let mut support_vectors = Array2::zeros((d, sv_cols.len()));
    for (k, &t) in sv_cols.iter().enumerate() {
        support_vectors.column_mut(k).assign(&f.column(t));
    }

    Ok(SvrHead {
        support_vectors,
        coefficients,
        bias,
        gamma,
        c,
        epsilon: params.epsilon,
    })
}
