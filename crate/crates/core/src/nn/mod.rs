//! Numerical core: shared optimizer, sparse autoencoder layers, greedy
//! stacking.

pub mod adam;
pub mod autoencoder;
pub mod stack;

pub use adam::Adam;
pub use autoencoder::{
    kl_bernoulli, sigmoid, train_layer, AutoencoderLayer, LayerGradients, TrainingHyperparams,
};
pub use stack::{greedy_stack, EncoderChain};
