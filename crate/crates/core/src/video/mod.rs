//! Per-frame video descriptors: normalized-luma statistics plus spatial and
//! temporal activity, assembled into the 90-row video feature matrix.

pub mod extract;
pub mod ggd;
pub mod mscn;
pub mod nss;
pub mod siti;

pub use extract::{extract_video_features, video_feature_names, VideoFeatureMatrix, VIDEO_DIM};
pub use ggd::{fit_aggd, fit_ggd, AggdFit, GgdFit};
pub use mscn::mscn;
pub use nss::{nss_feature_names, nss_features, NSS_DIM};
pub use siti::{spatial_index, temporal_index};
