//! Greedy layer-wise training and the stacked encoder chain.

use crate::error::{AvqError, Result};
use crate::nn::autoencoder::{train_layer, AutoencoderLayer, TrainingHyperparams};
use ndarray::Array2;

/// Ordered chain of trained encoders. Each layer maps the previous layer's
/// codes; an empty chain is the identity on `input_dim`-dimensional data.
#[derive(Debug, Clone)]
pub struct EncoderChain {
    input_dim: usize,
    pub layers: Vec<AutoencoderLayer>,
}

impl EncoderChain {
    pub fn identity(input_dim: usize) -> Self {
        EncoderChain {
            input_dim,
            layers: Vec::new(),
        }
    }

    pub fn new(input_dim: usize, layers: Vec<AutoencoderLayer>) -> Result<Self> {
        let mut dim = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.input_dim() != dim {
                return Err(AvqError::dimension(
                    format!("encoder chain layer {}", i),
                    dim,
                    layer.input_dim(),
                ));
            }
            dim = layer.hidden_dim();
        }
        Ok(EncoderChain { input_dim, layers })
    }

    /// Dimension trace [d0, d1, ..., dL].
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(self.layers.iter().map(|l| l.hidden_dim()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_dim, |l| l.hidden_dim())
    }

    /// Applies every encoder in order; the intermediate dimensions are
    /// asserted against the configured chain at each step.
    pub fn encode(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.input_dim {
            return Err(AvqError::dimension(
                "encoder chain input",
                self.input_dim,
                x.nrows(),
            ));
        }
        let mut codes = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            codes = layer.encode(&codes)?;
            assert_eq!(
                codes.nrows(),
                layer.hidden_dim(),
                "chain layer {} produced an unexpected dimension",
                i
            );
        }
        Ok(codes)
    }
}

/// Greedy layer-wise training: trains the first layer on `x`, encodes, trains
/// the next layer on the codes, and so on. Empty `dims` yields the identity
/// chain. Layer i is seeded with `hyper.seed + i` so stacks are reproducible.
pub fn greedy_stack(
    x: &Array2<f64>,
    dims: &[usize],
    hyper: &TrainingHyperparams,
) -> Result<EncoderChain> {
    let mut layers = Vec::with_capacity(dims.len());
    let mut codes = x.clone();
    for (i, &h) in dims.iter().enumerate() {
        if h == 0 {
            return Err(AvqError::Validation(format!(
                "chain dimension {} must be positive",
                i
            )));
        }
        let layer_hyper = TrainingHyperparams {
            seed: hyper.seed.wrapping_add(i as u64),
            ..hyper.clone()
        };
        let (layer, _) = train_layer(&codes, h, &layer_hyper)?;
        codes = layer.encode(&codes)?;
        layers.push(layer);
    }
    EncoderChain::new(x.nrows(), layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn quick_hyper(seed: u64) -> TrainingHyperparams {
        TrainingHyperparams {
            max_epochs: 5,
            seed,
            ..Default::default()
        }
    }

    fn toy_data(d: usize, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((d, n), |(r, c)| ((r * 13 + c * 5) % 17) as f64 / 17.0)
    }

    #[test]
    fn baseline_stack_dims() {
        let x = toy_data(115, 8);
        let chain = greedy_stack(&x, &[60, 25], &quick_hyper(1)).unwrap();
        assert_eq!(chain.dims(), vec![115, 60, 25]);
        let out = chain.encode(&x).unwrap();
        assert_eq!(out.dim(), (25, 8));
    }

    #[test]
    fn empty_dims_is_identity() {
        let x = toy_data(115, 4);
        let chain = greedy_stack(&x, &[], &quick_hyper(1)).unwrap();
        assert_eq!(chain.dims(), vec![115]);
        let out = chain.encode(&x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn three_layer_stack() {
        let x = toy_data(115, 6);
        let chain = greedy_stack(&x, &[90, 40, 25], &quick_hyper(2)).unwrap();
        assert_eq!(chain.layers.len(), 3);
        assert_eq!(chain.dims(), vec![115, 90, 40, 25]);
        assert_eq!(chain.encode(&x).unwrap().dim(), (25, 6));
    }

    #[test]
    fn chain_rejects_wrong_input_dim() {
        let x = toy_data(10, 4);
        let chain = greedy_stack(&x, &[4], &quick_hyper(0)).unwrap();
        let bad = toy_data(9, 4);
        assert!(chain.encode(&bad).is_err());
    }
}
