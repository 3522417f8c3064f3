//! Evaluation utilities: correlation metrics, cross-validation splits, and
//! the grouped cross-validated report.

pub mod dataset;
pub mod evaluate;
pub mod kfold;
pub mod metrics;

pub use dataset::{
    cache_path, cached_audio, cached_video, load_or_extract, prepare_features, write_audio_cache,
    write_video_cache,
};
pub use evaluate::{
    evaluate, EvalReport, FoldReport, GroupReport, PredPair, SequenceFeatures, MIN_GROUP_SIZE,
};
pub use kfold::kfold_split;
pub use metrics::{average_ranks, pearson, rmse, spearman};
