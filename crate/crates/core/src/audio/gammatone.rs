//! Fourth-order gammatone magnitude responses on an ERB-spaced grid.

use crate::error::{AvqError, Result};

/// Number of analysis bands.
pub const NUM_BANDS: usize = 25;

/// Lower center frequency of the bank.
pub const LOW_EDGE_HZ: f64 = 50.0;

/// Hard ceiling for the top center frequency.
pub const MAX_TOP_HZ: f64 = 16_000.0;

/// Lowest workable sample rate.
pub const MIN_SAMPLE_RATE: u32 = 8000;

/// Frequency in Hz to ERB-scale units.
pub fn erb_scale(hz: f64) -> f64 {
    21.4 * (1.0 + 4.37 * hz / 1000.0).log10()
}

/// Inverse of `erb_scale`.
pub fn erb_scale_inv(erb: f64) -> f64 {
    (10f64.powf(erb / 21.4) - 1.0) * 1000.0 / 4.37
}

/// Equivalent rectangular bandwidth at a center frequency.
pub fn erb_bandwidth(fc: f64) -> f64 {
    24.7 * (4.37 * fc / 1000.0 + 1.0)
}

/// A fixed bank of 25 gammatone magnitude responses, centers ERB-spaced
/// from 50 Hz up to min(16 kHz, 0.45 * sample_rate).
#[derive(Debug, Clone)]
pub struct GammatoneBank {
    centers: Vec<f64>,
}

impl GammatoneBank {
    pub fn new(sample_rate: u32) -> Result<Self> {
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(AvqError::Validation(format!(
                "sample rate {} Hz below the {} Hz minimum",
                sample_rate, MIN_SAMPLE_RATE
            )));
        }
        let top = MAX_TOP_HZ.min(0.45 * sample_rate as f64);
        let lo = erb_scale(LOW_EDGE_HZ);
        let hi = erb_scale(top);
        let centers = (0..NUM_BANDS)
            .map(|i| erb_scale_inv(lo + (hi - lo) * i as f64 / (NUM_BANDS - 1) as f64))
            .collect();
        Ok(GammatoneBank { centers })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Magnitude response of one band at a frequency: a fourth-order
    /// gammatone power curve, 1 at the center.
    pub fn response(&self, band: usize, hz: f64) -> f64 {
        let fc = self.centers[band];
        let b = 1.019 * erb_bandwidth(fc);
        let d = (hz - fc) / b;
        (1.0 + d * d).powi(-4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wideband_rates_span_50_to_16k() {
        let bank = GammatoneBank::new(48_000).unwrap();
        let centers = bank.centers();
        assert_eq!(centers.len(), NUM_BANDS);
        assert!((centers[0] - 50.0).abs() < 1e-6);
        assert!((centers[NUM_BANDS - 1] - 16_000.0).abs() < 1e-6);
    }

    #[test]
    fn narrowband_rate_caps_at_045_fs() {
        let bank = GammatoneBank::new(16_000).unwrap();
        let centers = bank.centers();
        assert!((centers[0] - 50.0).abs() < 1e-6);
        assert!((centers[NUM_BANDS - 1] - 7200.0).abs() < 1e-6);
    }

    #[test]
    fn centers_increase_with_uniform_erb_spacing() {
        let bank = GammatoneBank::new(16_000).unwrap();
        let centers = bank.centers();
        let first_gap = erb_scale(centers[1]) - erb_scale(centers[0]);
        for pair in centers.windows(2) {
            assert!(pair[0] < pair[1]);
            let gap = erb_scale(pair[1]) - erb_scale(pair[0]);
            assert!((gap - first_gap).abs() < 1e-9);
        }
    }

    #[test]
    fn low_sample_rate_rejected() {
        assert!(GammatoneBank::new(7999).is_err());
        assert!(GammatoneBank::new(8000).is_ok());
    }

    #[test]
    fn response_peaks_at_center() {
        let bank = GammatoneBank::new(16_000).unwrap();
        for band in [0, 7, 24] {
            let fc = bank.centers()[band];
            assert!((bank.response(band, fc) - 1.0).abs() < 1e-12);
            assert!(bank.response(band, fc * 1.3 + 40.0) < 1.0);
            assert!(bank.response(band, fc * 0.6) < 1.0);
        }
    }

    #[test]
    fn erb_scale_round_trips() {
        for hz in [50.0, 440.0, 4000.0, 16_000.0] {
            assert!((erb_scale_inv(erb_scale(hz)) - hz).abs() < 1e-6);
        }
    }
}
