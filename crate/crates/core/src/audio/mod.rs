//! Audio feature extraction: a 25-band intensity spectrogram aligned to
//! video frames, one column per frame window.

pub mod gammatone;

pub use gammatone::{erb_bandwidth, erb_scale, erb_scale_inv, GammatoneBank, NUM_BANDS};

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{AvqError, Result};
use crate::media::RawMedia;

/// Lower bound applied to every dB entry.
pub const DB_FLOOR: f64 = -80.0;

/// Audio feature matrix: 25 rows of per-band dB log-power, one column per
/// video frame.
#[derive(Debug, Clone)]
pub struct AudioFeatureMatrix {
    pub data: Array2<f64>,
    pub band_centers_hz: Vec<f64>,
}

/// Cache row names for audio features. The center frequency is embedded in
/// shortest round-trip decimal form so [`parse_band_center`] recovers it
/// bit-exactly.
pub fn audio_feature_names(centers: &[f64]) -> Vec<String> {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| format!("band{:02}_hz_{}", i, c))
        .collect()
}

/// Recovers the band center frequency from an [`audio_feature_names`] entry.
pub fn parse_band_center(name: &str) -> Option<f64> {
    let (_, hz) = name.split_once("_hz_")?;
    hz.parse().ok()
}

/// Symmetric Hann window of a given length.
fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos()))
        .collect()
}

/// Per-band spectral weights for a window length: rows are bands, entry k
/// weights FFT bin k (0..=len/2) by the gammatone magnitude response.
fn band_weights(bank: &GammatoneBank, sample_rate: u32, len: usize) -> Vec<Vec<f64>> {
    let bins = len / 2 + 1;
    (0..NUM_BANDS)
        .map(|band| {
            (0..bins)
                .map(|k| bank.response(band, k as f64 * sample_rate as f64 / len as f64))
                .collect()
        })
        .collect()
}

/// Extracts the 25-by-m audio intensity spectrogram for `m` video frames at
/// `fps`. Column j covers the waveform window [j/fps, (j+1)/fps); a window
/// whose start lies past the end of the audio is an error, a partial final
/// window is analyzed as-is.
pub fn extract_audio_features(
    media: &RawMedia,
    frame_count: usize,
    fps: f64,
) -> Result<AudioFeatureMatrix> {
    if frame_count == 0 {
        return Err(AvqError::Validation(
            "frame count must be positive".into(),
        ));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(AvqError::Validation(format!("invalid fps {}", fps)));
    }
    let bank = GammatoneBank::new(media.sample_rate)?;
    let sr = media.sample_rate as f64;
    let n = media.audio.len();

    let mut planner = FftPlanner::new();
    let mut plans: HashMap<usize, Arc<dyn Fft<f64>>> = HashMap::new();
    let mut windows: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut weights: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();

    let mut data = Array2::zeros((NUM_BANDS, frame_count));
    for j in 0..frame_count {
        let start = (j as f64 * sr / fps).ceil() as usize;
        let stop = (((j + 1) as f64 * sr / fps).ceil() as usize).min(n);
        if start >= n {
            return Err(AvqError::Validation(format!(
                "frame {} window starts at sample {} but audio has {} samples",
                j, start, n
            )));
        }
        let len = stop - start;
        let window = windows.entry(len).or_insert_with(|| hann(len));
        let plan = plans
            .entry(len)
            .or_insert_with(|| planner.plan_fft_forward(len));
        let w = weights
            .entry(len)
            .or_insert_with(|| band_weights(&bank, media.sample_rate, len));

        let mut buf: Vec<Complex<f64>> = media.audio[start..stop]
            .iter()
            .zip(window.iter())
            .map(|(s, h)| Complex::new(s * h, 0.0))
            .collect();
        plan.process(&mut buf);

        let norm = (len as f64) * (len as f64);
        let bins = len / 2 + 1;
        for band in 0..NUM_BANDS {
            let mut power = 0.0;
            for k in 0..bins {
                power += buf[k].norm_sqr() / norm * w[band][k];
            }
            let db = if power > 0.0 {
                (10.0 * power.log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            };
            data[(band, j)] = db;
        }
    }

    Ok(AudioFeatureMatrix {
        data,
        band_centers_hz: bank.centers().to_vec(),
    })
}
