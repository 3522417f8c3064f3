//! Sparse autoencoder layer: sigmoid encoder, linear decoder, trained with a
//! mean-squared reconstruction objective plus L2 weight decay and a KL
//! sparsity penalty on the mean hidden activation.

use crate::error::{AvqError, Result};
use crate::nn::adam::Adam;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Lower clamp for the mean hidden activation inside the KL term; keeps the
/// logs finite when a unit is dead or saturated.
pub const RHO_HAT_CLAMP: f64 = 1e-6;

/// Hyperparameters for training one autoencoder layer.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainingHyperparams {
    /// L2 weight regularization strength (lambda).
    pub l2_weight: f64,
    /// Sparsity regularization strength (beta).
    pub sparsity_weight: f64,
    /// Target mean hidden activation (rho), in (0, 1).
    pub sparsity_target: f64,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Relative stopping tolerance: stop when |dJ| < tolerance * J.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainingHyperparams {
    fn default() -> Self {
        TrainingHyperparams {
            l2_weight: 0.001,
            sparsity_weight: 4.0,
            sparsity_target: 0.05,
            max_epochs: 400,
            learning_rate: 1e-3,
            tolerance: 1e-9,
            seed: 0,
        }
    }
}

impl TrainingHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.l2_weight < 0.0 || self.sparsity_weight < 0.0 {
            return Err(AvqError::Validation(
                "regularization weights must be >= 0".into(),
            ));
        }
        if !(self.sparsity_target > 0.0 && self.sparsity_target < 1.0) {
            return Err(AvqError::Validation(
                "sparsity target must lie in (0, 1)".into(),
            ));
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

/// KL divergence between Bernoulli(rho) and Bernoulli(rho_hat), with
/// rho_hat clamped away from 0 and 1.
pub fn kl_bernoulli(rho: f64, rho_hat: f64) -> f64 {
    let r = rho_hat.clamp(RHO_HAT_CLAMP, 1.0 - RHO_HAT_CLAMP);
    rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One trained sparse autoencoder: encoder weights/bias, decoder
/// weights/bias, and the hyperparameters it was trained with.
#[derive(Debug, Clone)]
pub struct AutoencoderLayer {
    /// h-by-d encoder weights.
    pub w_enc: Array2<f64>,
    pub b_enc: Array1<f64>,
    /// d-by-h decoder weights.
    pub w_dec: Array2<f64>,
    pub b_dec: Array1<f64>,
    pub hyper: TrainingHyperparams,
}

/// Gradients of the layer loss, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub w_enc: Array2<f64>,
    pub b_enc: Array1<f64>,
    pub w_dec: Array2<f64>,
    pub b_dec: Array1<f64>,
}

impl AutoencoderLayer {
    /// New layer with seeded uniform weight init in [-r, r], r = sqrt(6/(d+h)),
    /// and zero biases. Sampling order is fixed: encoder weights row-major,
    /// then decoder weights row-major.
    pub fn init(input_dim: usize, hidden_dim: usize, hyper: TrainingHyperparams) -> Result<Self> {
        hyper.validate()?;
        if input_dim == 0 || hidden_dim == 0 {
            return Err(AvqError::Validation(
                "layer dimensions must be positive".into(),
            ));
        }
        let r = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut uniform = || rng.random::<f64>() * 2.0 * r - r;
        let w_enc = Array2::from_shape_simple_fn((hidden_dim, input_dim), &mut uniform);
        let w_dec = Array2::from_shape_simple_fn((input_dim, hidden_dim), &mut uniform);
        Ok(AutoencoderLayer {
            w_enc,
            b_enc: Array1::zeros(hidden_dim),
            w_dec,
            b_dec: Array1::zeros(input_dim),
            hyper,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_enc.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_enc.nrows()
    }

    /// sigmoid(W_enc x + b_enc), columns are samples.
    pub fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(AvqError::dimension("encode", self.input_dim(), x.nrows()));
        }
        let mut z = self.w_enc.dot(x);
        for (mut col, _) in z.axis_iter_mut(Axis(1)).zip(0..) {
            col += &self.b_enc;
        }
        Ok(z.mapv(sigmoid))
    }

    /// Affine decode W_dec h + b_dec (no output nonlinearity).
    pub fn decode(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        if h.nrows() != self.hidden_dim() {
            return Err(AvqError::dimension("decode", self.hidden_dim(), h.nrows()));
        }
        let mut x = self.w_dec.dot(h);
        for (mut col, _) in x.axis_iter_mut(Axis(1)).zip(0..) {
            col += &self.b_dec;
        }
        Ok(x)
    }

    /// Objective and analytic gradients on a d-by-n batch:
    /// J = mean per-sample squared reconstruction error
    ///   + lambda * (||W_enc||_F^2 + ||W_dec||_F^2)
    ///   + beta * sum_j KL(rho || rho_hat_j).
    pub fn loss(&self, x: &Array2<f64>) -> Result<(f64, LayerGradients)> {
        if x.nrows() != self.input_dim() {
            return Err(AvqError::dimension("loss", self.input_dim(), x.nrows()));
        }
        let n = x.ncols();
        if n == 0 {
            return Err(AvqError::Validation("loss needs at least 1 sample".into()));
        }
        let nf = n as f64;
        let lambda = self.hyper.l2_weight;
        let beta = self.hyper.sparsity_weight;
        let rho = self.hyper.sparsity_target;

        let a = self.encode(x)?;
        let xhat = self.decode(&a)?;
        let err = &xhat - x;

        let j_rec = err.iter().map(|e| e * e).sum::<f64>() / nf;
        let j_l2 = lambda
            * (self.w_enc.iter().map(|w| w * w).sum::<f64>()
                + self.w_dec.iter().map(|w| w * w).sum::<f64>());
        let rho_hat = a.mean_axis(Axis(1)).expect("n >= 1");
        let j_kl = beta
            * rho_hat
                .iter()
                .map(|&rh| kl_bernoulli(rho, rh))
                .sum::<f64>();
        let j = j_rec + j_l2 + j_kl;

        // dJ/dXhat = (2/n) E
        let d_xhat = err.mapv(|e| 2.0 * e / nf);
        let g_w_dec = d_xhat.dot(&a.t()) + &self.w_dec.mapv(|w| 2.0 * lambda * w);
        let g_b_dec = d_xhat.sum_axis(Axis(1));

        // gradient into activations: decoder backprop plus sparsity pressure
        let mut g_a = self.w_dec.t().dot(&d_xhat);
        let sparse_grad: Vec<f64> = rho_hat
            .iter()
            .map(|&rh| {
                let r = rh.clamp(RHO_HAT_CLAMP, 1.0 - RHO_HAT_CLAMP);
                beta * (-rho / r + (1.0 - rho) / (1.0 - r)) / nf
            })
            .collect();
        for (mut row, &sg) in g_a.axis_iter_mut(Axis(0)).zip(sparse_grad.iter()) {
            row += sg;
        }

        let g_z = &g_a * &a.mapv(|v| v * (1.0 - v));
        let g_w_enc = g_z.dot(&x.t()) + &self.w_enc.mapv(|w| 2.0 * lambda * w);
        let g_b_enc = g_z.sum_axis(Axis(1));

        Ok((
            j,
            LayerGradients {
                w_enc: g_w_enc,
                b_enc: g_b_enc,
                w_dec: g_w_dec,
                b_dec: g_b_dec,
            },
        ))
    }

    /// Mean reconstruction MSE per sample (no regularizers).
    pub fn reconstruction_mse(&self, x: &Array2<f64>) -> Result<f64> {
        let xhat = self.decode(&self.encode(x)?)?;
        let err = &xhat - x;
        Ok(err.iter().map(|e| e * e).sum::<f64>() / x.ncols() as f64)
    }

    pub fn param_count(&self) -> usize {
        self.w_enc.len() + self.b_enc.len() + self.w_dec.len() + self.b_dec.len()
    }

    /// Parameters flattened in fixed order: W_enc, b_enc, W_dec, b_dec
    /// (row-major matrices).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.w_enc.iter());
        out.extend(self.b_enc.iter());
        out.extend(self.w_dec.iter());
        out.extend(self.b_dec.iter());
        out
    }

    pub fn unflatten_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let mut offset = 0;
        for w in self.w_enc.iter_mut() {
            *w = flat[offset];
            offset += 1;
        }
        let _ = (d, h);
        for b in self.b_enc.iter_mut() {
            *b = flat[offset];
            offset += 1;
        }
        for w in self.w_dec.iter_mut() {
            *w = flat[offset];
            offset += 1;
        }
        for b in self.b_dec.iter_mut() {
            *b = flat[offset];
            offset += 1;
        }
    }
}

impl LayerGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out =
            Vec::with_capacity(self.w_enc.len() + self.b_enc.len() + self.w_dec.len() + self.b_dec.len());
        out.extend(self.w_enc.iter());
        out.extend(self.b_enc.iter());
        out.extend(self.w_dec.iter());
        out.extend(self.b_dec.iter());
        out
    }
}

/// Trains one sparse autoencoder layer on the d-by-n matrix `x` with hidden
/// dimension `hidden_dim`. Full-batch adaptive-moment descent, seeded init;
/// stops when the relative loss change drops below the tolerance or after
/// `max_epochs` passes. Returns the trained layer and the final objective.
pub fn train_layer(
    x: &Array2<f64>,
    hidden_dim: usize,
    hyper: &TrainingHyperparams,
) -> Result<(AutoencoderLayer, f64)> {
    let (d, n) = (x.nrows(), x.ncols());
    if n == 0 {
        return Err(AvqError::Validation("training needs at least 1 sample".into()));
    }
    if let Some((r, c)) = first_nonfinite(x) {
        return Err(AvqError::NonFinite {
            location: format!("training input ({}, {})", r, c),
        });
    }
    if n < hidden_dim {
        log::warn!(
            "training layer {}->{} on only {} samples (fewer than hidden units)",
            d,
            hidden_dim,
            n
        );
    }

    let mut layer = AutoencoderLayer::init(d, hidden_dim, hyper.clone())?;
    let mut params = layer.flatten_params();
    let mut opt = Adam::new(params.len(), hyper.learning_rate);
    let mut prev_j = f64::INFINITY;
    let mut last_j = f64::INFINITY;

    for epoch in 0..hyper.max_epochs {
        let (j, grads) = layer.loss(x)?;
        if !j.is_finite() {
            return Err(AvqError::Training {
                epoch,
                message: format!("loss became non-finite ({})", j),
            });
        }
        last_j = j;
        if (prev_j - j).abs() < hyper.tolerance * j {
            break;
        }
        prev_j = j;
        opt.step(&mut params, &grads.flatten());
        layer.unflatten_params(&params);
    }
    Ok((layer, last_j))
}

pub(crate) fn first_nonfinite(x: &Array2<f64>) -> Option<(usize, usize)> {
    for ((r, c), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Some((r, c));
        }
    }
    None
}
