//! Assembly of per-frame descriptors into the full video feature matrix.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{AvqError, Result};
use crate::media::RawMedia;
use crate::video::nss::{nss_feature_names, nss_features, NSS_DIM};
use crate::video::siti::{spatial_index, temporal_index};

/// Rows in the video feature matrix: 88 scene statistics plus SI and TI.
pub const VIDEO_DIM: usize = NSS_DIM + 2;

/// Video feature matrix: one 90-entry column per frame, rows labeled by
/// `feature_names`. The last two rows are the spatial and temporal indices.
#[derive(Debug, Clone)]
pub struct VideoFeatureMatrix {
    pub data: Array2<f64>,
    pub feature_names: Vec<String>,
}

impl VideoFeatureMatrix {
    pub fn frame_count(&self) -> usize {
        self.data.ncols()
    }
}

/// Row labels for the video feature matrix.
pub fn video_feature_names() -> Vec<String> {
    let mut names = nss_feature_names();
    names.push("si".to_string());
    names.push("ti".to_string());
    names
}

/// Extracts the 90-by-m video feature matrix. Column j holds the scene
/// statistics of frame j followed by its SI and TI; TI of the first frame
/// is 0. Frames are processed in parallel and assembled in order.
pub fn extract_video_features(media: &RawMedia) -> Result<VideoFeatureMatrix> {
    let m = media.frames.len();
    if m < 2 {
        return Err(AvqError::Validation(format!(
            "video feature extraction needs at least 2 frames, got {}",
            m
        )));
    }

    let columns: Result<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let frame = &media.frames[j];
            let mut col = nss_features(frame)?;
            col.push(spatial_index(frame));
            let ti = if j == 0 {
                0.0
            } else {
                temporal_index(frame, &media.frames[j - 1])?
            };
            col.push(ti);
            Ok(col)
        })
        .collect();
    let columns = columns?;

    let names = video_feature_names();
    let mut data = Array2::zeros((VIDEO_DIM, m));
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if !v.is_finite() {
                return Err(AvqError::NonFinite {
                    location: format!("video feature '{}' of frame {}", names[i], j),
                });
            }
            data[(i, j)] = v;
        }
    }

    Ok(VideoFeatureMatrix {
        data,
        feature_names: names,
    })
}
