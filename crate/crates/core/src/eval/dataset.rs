//! Dataset assembly: turns manifest records into per-sequence feature
//! matrices, reading cached extractions when they are still valid and
//! extracting (then caching) otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use crate::audio::{
    audio_feature_names, extract_audio_features, parse_band_center, AudioFeatureMatrix, NUM_BANDS,
};
use crate::error::{AvqError, Result};
use crate::eval::evaluate::SequenceFeatures;
use crate::features::{read_feature_cache, write_feature_cache};
use crate::media::{load_media, SequenceRecord};
use crate::video::{extract_video_features, VideoFeatureMatrix, VIDEO_DIM};

/// Cache file for one sequence and modality, under `cache_dir`.
pub fn cache_path(cache_dir: &Path, id: &str, modality: &str) -> PathBuf {
    cache_dir.join(format!("{}.{}.bin", id, modality))
}

/// A still-valid cached video matrix for this record, if one exists.
pub fn cached_video(cache_dir: &Path, record: &SequenceRecord) -> Option<VideoFeatureMatrix> {
    let path = cache_path(cache_dir, &record.id, "video");
    let (data, sidecar) = read_feature_cache(&path).ok()?;
    if sidecar.source_id != record.id || data.nrows() != VIDEO_DIM {
        return None;
    }
    Some(VideoFeatureMatrix {
        data,
        feature_names: sidecar.feature_names,
    })
}

/// A still-valid cached audio matrix for this record, if one exists.
pub fn cached_audio(cache_dir: &Path, record: &SequenceRecord) -> Option<AudioFeatureMatrix> {
    let path = cache_path(cache_dir, &record.id, "audio");
    let (data, sidecar) = read_feature_cache(&path).ok()?;
    if sidecar.source_id != record.id || data.nrows() != NUM_BANDS {
        return None;
    }
    let band_centers_hz: Vec<f64> = sidecar
        .feature_names
        .iter()
        .filter_map(|n| parse_band_center(n))
        .collect();
    if band_centers_hz.len() != NUM_BANDS {
        return None;
    }
    Some(AudioFeatureMatrix {
        data,
        band_centers_hz,
    })
}

/// Writes the video cache pair for one record.
pub fn write_video_cache(
    cache_dir: &Path,
    record: &SequenceRecord,
    video: &VideoFeatureMatrix,
) -> Result<()> {
    fs::create_dir_all(cache_dir).map_err(|e| AvqError::io(cache_dir, e))?;
    write_feature_cache(
        &cache_path(cache_dir, &record.id, "video"),
        &video.data,
        &video.feature_names,
        &record.id,
    )
}

/// Writes the audio cache pair for one record.
pub fn write_audio_cache(
    cache_dir: &Path,
    record: &SequenceRecord,
    audio: &AudioFeatureMatrix,
) -> Result<()> {
    fs::create_dir_all(cache_dir).map_err(|e| AvqError::io(cache_dir, e))?;
    write_feature_cache(
        &cache_path(cache_dir, &record.id, "audio"),
        &audio.data,
        &audio_feature_names(&audio.band_centers_hz),
        &record.id,
    )
}

/// Features for one sequence, from cache when valid, else extracted from the
/// media files and written back to the cache.
pub fn load_or_extract(
    record: &SequenceRecord,
    cache_dir: &Path,
) -> Result<(VideoFeatureMatrix, AudioFeatureMatrix)> {
    if let (Some(video), Some(audio)) = (
        cached_video(cache_dir, record),
        cached_audio(cache_dir, record),
    ) {
        if video.data.ncols() == audio.data.ncols() {
            return Ok((video, audio));
        }
        log::warn!(
            "cached features for `{}` disagree on frame count, re-extracting",
            record.id
        );
    }

    let media = load_media(record)?;
    let video = extract_video_features(&media)?;
    let audio = extract_audio_features(&media, media.frame_count(), record.fps)?;
    write_video_cache(cache_dir, record, &video)?;
    write_audio_cache(cache_dir, record, &audio)?;
    Ok((video, audio))
}

/// Features for a whole manifest, in record order.
pub fn prepare_features(
    records: &[SequenceRecord],
    cache_dir: &Path,
) -> Result<Vec<SequenceFeatures>> {
    records
        .iter()
        .map(|record| {
            let (video, audio) = load_or_extract(record, cache_dir).map_err(|e| {
                AvqError::Validation(format!("sequence `{}`: {}", record.id, e))
            })?;
            Ok(SequenceFeatures {
                record: record.clone(),
                video,
                audio,
            })
        })
        .collect()
}
