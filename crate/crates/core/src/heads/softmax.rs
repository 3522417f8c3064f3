//! Softmax classification head. Columns of the feature matrix are classified
//! into quality bins; the class posterior is then collapsed to a continuous
//! score by `posterior_to_score`.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};
use crate::nn::adam::Adam;

use super::{class_centers, posterior_to_score, ScoreMode};

/// Training settings for the softmax head.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SoftmaxTrainConfig {
    /// L2 penalty on the weight matrix.
    pub l2_weight: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Relative stopping tolerance: stop when |dJ| < tolerance * J.
    pub tolerance: f64,
    pub seed: u64,
    pub score_mode: ScoreMode,
}

impl Default for SoftmaxTrainConfig {
    fn default() -> Self {
        SoftmaxTrainConfig {
            l2_weight: 1e-4,
            learning_rate: 1e-3,
            max_epochs: 400,
            tolerance: 1e-9,
            seed: 0,
            score_mode: ScoreMode::Expectation,
        }
    }
}

impl SoftmaxTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l2_weight < 0.0 {
            return Err(AvqError::Validation("l2 weight must be >= 0".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(AvqError::Validation("learning rate must be > 0".into()));
        }
        if self.tolerance <= 0.0 {
            return Err(AvqError::Validation("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// A trained softmax head: affine map to `q` logits plus the class centers
/// used to turn posteriors into scores.
#[derive(Debug, Clone)]
pub struct SoftmaxHead {
    /// q-by-d weights.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub class_centers: Vec<f64>,
    pub score_mode: ScoreMode,
}

/// Gradients of the softmax objective, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct SoftmaxGradients {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl SoftmaxGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.w.len() + self.b.len());
        out.extend(self.w.iter());
        out.extend(self.b.iter());
        out
    }
}

impl SoftmaxHead {
    /// All-zero head over `q` equal-width bins; every posterior is uniform.
    pub fn zeros(input_dim: usize, q: usize) -> Result<Self> {
        if q < 2 {
            return Err(AvqError::Validation(format!(
                "need at least 2 quality classes, got {}",
                q
            )));
        }
        if input_dim == 0 {
            return Err(AvqError::Validation("input dimension must be > 0".into()));
        }
        Ok(SoftmaxHead {
            w: Array2::zeros((q, input_dim)),
            b: Array1::zeros(q),
            class_centers: class_centers(q),
            score_mode: ScoreMode::Expectation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.w.nrows()
    }

    fn logits(&self, f: &Array2<f64>) -> Result<Array2<f64>> {
        if f.nrows() != self.input_dim() {
            return Err(AvqError::dimension(
                "softmax input",
                self.input_dim(),
                f.nrows(),
            ));
        }
        let mut z = self.w.dot(f);
        for mut col in z.axis_iter_mut(Axis(1)) {
            col += &self.b;
        }
        Ok(z)
    }

    /// Class posteriors for each column of `f`, as a q-by-n matrix whose
    /// columns each sum to 1.
    pub fn posteriors(&self, f: &Array2<f64>) -> Result<Array2<f64>> {
        let mut z = self.logits(f)?;
        for mut col in z.axis_iter_mut(Axis(1)) {
            let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            col.mapv_inplace(|v| (v - max).exp());
            let total = col.sum();
            col.mapv_inplace(|v| v / total);
        }
        Ok(z)
    }

    /// Per-column scores in [1, 5].
    pub fn predict(&self, f: &Array2<f64>) -> Result<Vec<f64>> {
        let p = self.posteriors(f)?;
        let mut scores = Vec::with_capacity(p.ncols());
        for col in p.axis_iter(Axis(1)) {
            let col: Vec<f64> = col.iter().cloned().collect();
            let s = match self.score_mode {
                ScoreMode::Expectation => posterior_to_score(&col, &self.class_centers)?,
                ScoreMode::Argmax => {
                    let best = col
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap();
                    self.class_centers[best]
                }
            };
            scores.push(s);
        }
        Ok(scores)
    }

    /// Mean cross-entropy over columns plus the L2 weight penalty, with
    /// analytic gradients.
    pub fn loss(
        &self,
        f: &Array2<f64>,
        targets: &Array2<f64>,
        l2_weight: f64,
    ) -> Result<(f64, SoftmaxGradients)> {
        let n = f.ncols();
        if targets.ncols() != n || targets.nrows() != self.num_classes() {
            return Err(AvqError::dimension(
                "softmax targets",
                self.num_classes() * n,
                targets.nrows() * targets.ncols(),
            ));
        }
        let z = self.logits(f)?;
        let mut p = z.clone();
        let mut cross_entropy = 0.0;
        for (j, (mut pcol, zcol)) in p
            .axis_iter_mut(Axis(1))
            .zip(z.axis_iter(Axis(1)))
            .enumerate()
        {
            let max = zcol.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + zcol.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            pcol.mapv_inplace(|v| (v - lse).exp());
            for (q, zv) in zcol.iter().enumerate() {
                let t = targets[(q, j)];
                if t != 0.0 {
                    cross_entropy -= t * (zv - lse);
                }
            }
        }
        let j = cross_entropy / n as f64
            + l2_weight * self.w.iter().map(|v| v * v).sum::<f64>();

        let d_z = (&p - targets) / n as f64;
        let g_w = d_z.dot(&f.t()) + &(2.0 * l2_weight * &self.w);
        let g_b = d_z.sum_axis(Axis(1));
        Ok((j, SoftmaxGradients { w: g_w, b: g_b }))
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// Parameters as one flat vector: weights row-major, then biases.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.w.iter());
        out.extend(self.b.iter());
        out
    }

    /// Inverse of `flatten_params`.
    pub fn unflatten_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let nw = self.w.len();
        self.w
            .iter_mut()
            .zip(&flat[..nw])
            .for_each(|(dst, src)| *dst = *src);
        self.b
            .iter_mut()
            .zip(&flat[nw..])
            .for_each(|(dst, src)| *dst = *src);
    }
}

/// One-hot target matrix (q-by-n) from class indices.
pub fn one_hot(classes: &[usize], q: usize) -> Result<Array2<f64>> {
    let mut t = Array2::zeros((q, classes.len()));
    for (j, &c) in classes.iter().enumerate() {
        if c >= q {
            return Err(AvqError::Validation(format!(
                "class index {} out of range for {} classes",
                c, q
            )));
        }
        t[(c, j)] = 1.0;
    }
    Ok(t)
}

/// Ridge least-squares fit of the affine logit map onto signed class
/// indicators (+2 for the true class, -2 otherwise), solved on the augmented
/// Gram matrix by Cholesky factorization. Used as the optimizer's starting
/// point.
fn warm_start(f: &Array2<f64>, targets: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let (d, n) = (f.nrows(), f.ncols());
    let q = targets.nrows();
    let m = d + 1;

    let mut gram = vec![0.0; m * m];
    let ff = f.dot(&f.t());
    for r in 0..d {
        for c in 0..d {
            gram[r * m + c] = ff[(r, c)];
        }
    }
    let row_sums = f.sum_axis(Axis(1));
    for r in 0..d {
        gram[r * m + d] = row_sums[r];
        gram[d * m + r] = row_sums[r];
    }
    gram[d * m + d] = n as f64;
    let mean_diag = (0..m).map(|i| gram[i * m + i]).sum::<f64>() / m as f64;
    let ridge = 1e-6 * mean_diag + 1e-9;
    for i in 0..m {
        gram[i * m + i] += ridge;
    }

    let y = targets.mapv(|t| 4.0 * t - 2.0);
    let fy = f.dot(&y.t());
    let y_sums = y.sum_axis(Axis(1));

    for k in 0..m {
        let mut v = gram[k * m + k];
        for j in 0..k {
            v -= gram[k * m + j] * gram[k * m + j];
        }
        let pivot = v.max(1e-12).sqrt();
        gram[k * m + k] = pivot;
        for i in (k + 1)..m {
            let mut s = gram[i * m + k];
            for j in 0..k {
                s -= gram[i * m + j] * gram[k * m + j];
            }
            gram[i * m + k] = s / pivot;
        }
    }

    let mut w = Array2::zeros((q, d));
    let mut b = Array1::zeros(q);
    let mut x = vec![0.0; m];
    for c in 0..q {
        for r in 0..d {
            x[r] = fy[(r, c)];
        }
        x[d] = y_sums[c];
        for i in 0..m {
            let mut s = x[i];
            for j in 0..i {
                s -= gram[i * m + j] * x[j];
            }
            x[i] = s / gram[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = x[i];
            for j in (i + 1)..m {
                s -= gram[j * m + i] * x[j];
            }
            x[i] = s / gram[i * m + i];
        }
        for r in 0..d {
            w[(c, r)] = x[r];
        }
        b[c] = x[d];
    }
    (w, b)
}

/// Trains a softmax head on the d-by-n features `f` against one-hot targets.
/// Full-batch adaptive-moment descent from a deterministic least-squares warm
/// start; stops when the relative loss change drops below the tolerance or
/// after `max_epochs`.
pub fn train_softmax(
    f: &Array2<f64>,
    targets: &Array2<f64>,
    cfg: &SoftmaxTrainConfig,
) -> Result<SoftmaxHead> {
    cfg.validate()?;
    let n = f.ncols();
    let q = targets.nrows();
    if n == 0 {
        return Err(AvqError::Validation("training needs at least 1 sample".into()));
    }
    if q < 2 {
        return Err(AvqError::Validation(format!(
            "need at least 2 quality classes, got {}",
            q
        )));
    }
    if targets.ncols() != n {
        return Err(AvqError::dimension("softmax targets", n, targets.ncols()));
    }
    for (j, col) in targets.axis_iter(Axis(1)).enumerate() {
        let ones = col.iter().filter(|v| **v == 1.0).count();
        let zeros = col.iter().filter(|v| **v == 0.0).count();
        if ones != 1 || ones + zeros != q {
            return Err(AvqError::Validation(format!(
                "target column {} is not one-hot",
                j
            )));
        }
    }
    for (c, row) in targets.axis_iter(Axis(0)).enumerate() {
        if row.sum() == 0.0 {
            log::warn!("quality class {} has no training examples", c);
        }
    }
    if let Some((r, c)) = crate::nn::autoencoder::first_nonfinite(f) {
        return Err(AvqError::NonFinite {
            location: format!("softmax training input ({}, {})", r, c),
        });
    }

    let (w, b) = warm_start(f, targets);
    let mut head = SoftmaxHead {
        w,
        b,
        class_centers: class_centers(q),
        score_mode: cfg.score_mode,
    };

    let mut params = head.flatten_params();
    let mut opt = Adam::new(params.len(), cfg.learning_rate);
    let mut prev_j = f64::INFINITY;
    for epoch in 0..cfg.max_epochs {
        let (j, grads) = head.loss(f, targets, cfg.l2_weight)?;
        if !j.is_finite() {
            return Err(AvqError::Training {
                epoch,
                message: format!("loss became non-finite ({})", j),
            });
        }
        if (prev_j - j).abs() < cfg.tolerance * j {
            break;
        }
        prev_j = j;
        opt.step(&mut params, &grads.flatten());
        head.unflatten_params(&params);
    }
    Ok(head)
}
