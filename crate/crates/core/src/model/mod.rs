//! Model assembly: feature scaling, the stacked encoder chain, quality
//! heads, and on-disk persistence.

pub mod io;
pub mod scaler;
pub mod stacked;

pub use io::{load_model, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use scaler::{FeatureScaler, ScalerMode, MINMAX_CLAMP_HI, MINMAX_CLAMP_LO};
pub use stacked::{
    merge_and_scale, merge_features, predict_sequence, train_model, Aggregation,
    FeatureSelection, StackedQualityModel, FINE_TUNE_MAX_EPOCHS,
};
