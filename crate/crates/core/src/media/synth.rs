//! Synthetic audio-visual dataset generator.
//!
//! Produces filtered-noise video textures drifting at a fixed speed and a
//! band-limited tone chord plus noise, applies one audio and one video
//! distortion per sequence at a gridded severity, and assigns a synthetic
//! subjective score that decreases with the stronger of the two distortions
//! (video weighted harder than audio). Distortion strength is deterministic
//! per frame and per sample so the corruption level of a sequence is fully
//! decided by its severity; randomness only places the damage. Identical
//! spec and seed give byte-identical files.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};
use crate::media::manifest::{
    write_manifest, AudioDistortion, SequenceRecord, VideoDistortion,
};
use crate::media::raw::{write_wav, write_y4m};

/// Severity grid shared by both channels.
pub const SEVERITIES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Weight of the video severity in the combined score.
pub const VIDEO_WEIGHT: f64 = 1.0;
/// Weight of the audio severity in the combined score.
pub const AUDIO_WEIGHT: f64 = 0.6;

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthSpec {
    pub n_sequences: usize,
    pub seed: u64,
    #[serde(default = "default_frame_width")]
    pub frame_width: usize,
    #[serde(default = "default_frame_height")]
    pub frame_height: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
}

fn default_frame_width() -> usize {
    64
}
fn default_frame_height() -> usize {
    64
}
fn default_fps() -> f64 {
    10.0
}
fn default_duration() -> f64 {
    3.0
}
fn default_sample_rate() -> u32 {
    16_000
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sequences == 0 {
            return Err(AvqError::Validation("need at least 1 sequence".into()));
        }
        if self.frame_width < 32 || self.frame_height < 32 {
            return Err(AvqError::Validation(
                "frames must be at least 32x32 for feature extraction".into(),
            ));
        }
        if !(self.fps > 0.0) {
            return Err(AvqError::Validation("fps must be > 0".into()));
        }
        if self.frame_count() < 2 {
            return Err(AvqError::Validation(
                "duration times fps must give at least 2 frames".into(),
            ));
        }
        if self.sample_rate < 8000 {
            return Err(AvqError::Validation(
                "sample rate must be at least 8000 Hz".into(),
            ));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    fn sample_count(&self) -> usize {
        (self.frame_count() as f64 / self.fps * self.sample_rate as f64).round() as usize
    }
}

/// Parses a SynthSpec from a TOML file.
pub fn load_synth_spec(path: &Path) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| AvqError::io(path, e))?;
    toml::from_str(&text).map_err(|e| AvqError::Config(format!("{}: {}", path.display(), e)))
}

/// The synthetic subjective score before clamping: 5 at zero severity,
/// dropping linearly with the dominant channel.
pub fn synthetic_mos(severity_audio: f64, severity_video: f64, jitter: f64) -> f64 {
    let combined = combined_severity(severity_audio, severity_video);
    (5.0 - 3.5 * combined + jitter).clamp(1.0, 5.0)
}

/// max(w_a * s_audio, w_v * s_video); video dominates at equal severity.
pub fn combined_severity(severity_audio: f64, severity_video: f64) -> f64 {
    (AUDIO_WEIGHT * severity_audio).max(VIDEO_WEIGHT * severity_video)
}

/// Generates the dataset under `out_dir` and returns the manifest path.
pub fn synth_dataset(spec: &SynthSpec, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| AvqError::io(out_dir, e))?;
    let m = spec.frame_count();
    let n_samples = spec.sample_count();

    let mut records = Vec::with_capacity(spec.n_sequences);
    for i in 0..spec.n_sequences {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);

        // fixed draw order keeps every sequence reproducible independent of
        // the others
        let audio_kind = [
            AudioDistortion::Noise,
            AudioDistortion::Chop,
            AudioDistortion::Clip,
            AudioDistortion::Echo,
        ][rng.random_range(0..4)];
        let severity_audio = SEVERITIES[rng.random_range(0..SEVERITIES.len())];
        let video_kind = [
            VideoDistortion::PacketLoss,
            VideoDistortion::FrameFreezing,
            VideoDistortion::Bitrate,
        ][rng.random_range(0..3)];
        let severity_video = SEVERITIES[rng.random_range(0..SEVERITIES.len())];
        let jitter = rng.random::<f64>() * 0.2 - 0.1;

        let mut frames = generate_video(&mut rng, spec, m);
        let mut audio = generate_audio(&mut rng, spec, n_samples);
        if severity_audio > 0.0 {
            apply_audio_distortion(audio_kind, severity_audio, &mut audio, spec.sample_rate);
        }
        if severity_video > 0.0 {
            apply_video_distortion(video_kind, severity_video, &mut frames, &mut rng);
        }

        let id = format!("seq{:03}", i);
        let video_path = out_dir.join(format!("{}.y4m", id));
        let audio_path = out_dir.join(format!("{}.wav", id));
        write_y4m(&video_path, &frames, spec.fps)?;
        write_wav(&audio_path, &audio, spec.sample_rate)?;

        records.push(SequenceRecord {
            id,
            video_path,
            audio_path,
            fps: spec.fps,
            mos: synthetic_mos(severity_audio, severity_video, jitter),
            audio_distortion: if severity_audio > 0.0 {
                audio_kind
            } else {
                AudioDistortion::None
            },
            video_distortion: if severity_video > 0.0 {
                video_kind
            } else {
                VideoDistortion::None
            },
            severity: Some(combined_severity(severity_audio, severity_video)),
        });
    }
    let manifest = out_dir.join("manifest.csv");
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}

/// Periodic smoothed-noise canvas translated at a fixed speed; only the
/// drift direction varies between sequences.
fn generate_video(rng: &mut ChaCha8Rng, spec: &SynthSpec, m: usize) -> Vec<Array2<f64>> {
    let (h, w) = (spec.frame_height, spec.frame_width);
    let mut canvas = Array2::from_shape_simple_fn((h, w), || rng.random::<f64>());
    for _ in 0..2 {
        canvas = wrap_box_blur(&canvas, 2);
    }
    let lo = canvas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = canvas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    canvas.mapv_inplace(|v| 30.0 + (v - lo) / span * 195.0);

    let velocities = [
        (1i64, 2i64),
        (2, 1),
        (-1, 2),
        (2, -1),
        (1, -2),
        (-2, 1),
        (-1, -2),
        (-2, -1),
    ];
    let (vy, vx) = velocities[rng.random_range(0..velocities.len())];
    (0..m)
        .map(|t| {
            let dy = (t as i64 * vy).rem_euclid(h as i64) as usize;
            let dx = (t as i64 * vx).rem_euclid(w as i64) as usize;
            Array2::from_shape_fn((h, w), |(r, c)| {
                canvas[((r + dy) % h, (c + dx) % w)].round()
            })
        })
        .collect()
}

fn wrap_box_blur(plane: &Array2<f64>, radius: usize) -> Array2<f64> {
    let (h, w) = plane.dim();
    let span = (2 * radius + 1) as f64;
    let mut tmp = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for d in 0..=2 * radius {
                let cc = (c + w + d - radius) % w;
                acc += plane[(r, cc)];
            }
            tmp[(r, c)] = acc / span;
        }
    }
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for d in 0..=2 * radius {
                let rr = (r + h + d - radius) % h;
                acc += tmp[(rr, c)];
            }
            out[(r, c)] = acc / span;
        }
    }
    out
}

/// A fixed four-tone chord plus a small noise floor; only the phases vary
/// between sequences.
fn generate_audio(rng: &mut ChaCha8Rng, spec: &SynthSpec, n_samples: usize) -> Vec<f64> {
    let sr = spec.sample_rate as f64;
    let nyquist = sr / 2.0;
    let mut tones = Vec::with_capacity(4);
    for (freq, amp) in [(220.0, 0.22), (880.0, 0.20), (2500.0, 0.16), (5200.0, 0.12)] {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        if freq < nyquist {
            tones.push((freq, amp, phase));
        }
    }
    (0..n_samples)
        .map(|n| {
            let t = n as f64 / sr;
            let mut s = 0.0;
            for (freq, amp, phase) in &tones {
                s += amp * (std::f64::consts::TAU * freq * t + phase).sin();
            }
            s + 0.02 * (rng.random::<f64>() * 2.0 - 1.0)
        })
        .collect()
}

fn apply_audio_distortion(
    kind: AudioDistortion,
    severity: f64,
    audio: &mut [f64],
    sample_rate: u32,
) {
    match kind {
        AudioDistortion::None => {}
        AudioDistortion::Noise => {
            // deterministic pseudo-noise keyed on the sample index so the
            // severity alone decides the draw count
            let mut state = 0x9E3779B97F4A7C15u64;
            for s in audio.iter_mut() {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64;
                *s += 0.5 * severity * (2.0 * u - 1.0);
            }
        }
        AudioDistortion::Chop => {
            let period = (sample_rate as f64 * 0.1).round() as usize;
            let dropped = (period as f64 * 0.6 * severity).round() as usize;
            for (n, s) in audio.iter_mut().enumerate() {
                if n % period < dropped {
                    *s = 0.0;
                }
            }
        }
        AudioDistortion::Clip => {
            let peak = audio.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
            let threshold = peak * (1.0 - 0.85 * severity);
            for s in audio.iter_mut() {
                *s = s.clamp(-threshold, threshold);
            }
        }
        AudioDistortion::Echo => {
            // regenerative echo: a short feedback tap that comb-filters the
            // sustained tones
            let delay = (sample_rate as f64 * 0.023).round().max(1.0) as usize;
            let gain = 0.85 * severity;
            for n in delay..audio.len() {
                audio[n] += gain * audio[n - delay];
            }
        }
    }
    let peak = audio.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
    if peak > 0.99 {
        let scale = 0.99 / peak;
        for s in audio.iter_mut() {
            *s *= scale;
        }
    }
}

const BLOCK: usize = 8;

fn apply_video_distortion(
    kind: VideoDistortion,
    severity: f64,
    frames: &mut [Array2<f64>],
    rng: &mut ChaCha8Rng,
) {
    match kind {
        VideoDistortion::None => {}
        VideoDistortion::PacketLoss => {
            // every frame loses the same number of blocks to flat concealment
            // patches; the positions are the only random part
            let (h, w) = frames[0].dim();
            let (bh, bw) = (h / BLOCK, w / BLOCK);
            let corrupted = ((bh * bw) as f64 * 0.5 * severity).round().max(1.0) as usize;
            let shift = 40.0 * severity;
            for frame in frames.iter_mut() {
                for k in 0..corrupted {
                    let dst = (rng.random_range(0..bh), rng.random_range(0..bw));
                    let offset = if k % 2 == 0 { shift } else { -shift };
                    let mut mean = 0.0;
                    for r in 0..BLOCK {
                        for c in 0..BLOCK {
                            mean += frame[(dst.0 * BLOCK + r, dst.1 * BLOCK + c)];
                        }
                    }
                    mean /= (BLOCK * BLOCK) as f64;
                    let fill = (mean + offset).clamp(0.0, 255.0).round();
                    for r in 0..BLOCK {
                        for c in 0..BLOCK {
                            frame[(dst.0 * BLOCK + r, dst.1 * BLOCK + c)] = fill;
                        }
                    }
                }
            }
        }
        VideoDistortion::FrameFreezing => {
            // display persistence: every frame keeps a severity-scaled
            // fraction of the previously displayed frame, so refreshes lag
            // and motion smears into a trail
            let alpha = 0.88 * severity;
            if alpha > 0.0 {
                for t in 1..frames.len() {
                    let (shown, rest) = frames.split_at_mut(t);
                    let prev = &shown[t - 1];
                    rest[0].zip_mut_with(prev, |x, p| *x = (1.0 - alpha) * *x + alpha * *p);
                }
            }
        }
        VideoDistortion::Bitrate => {
            // the blur radius interpolates fractionally between the two
            // nearest integer kernels
            let radius = 3.5 * severity;
            let base = radius.floor() as usize;
            let frac = radius - radius.floor();
            let levels = (256.0 - 224.0 * severity).round();
            let q = 256.0 / levels;
            for frame in frames.iter_mut() {
                let lo = clamp_box_blur(frame, base);
                let blurred = if frac > 0.0 {
                    let hi = clamp_box_blur(frame, base + 1);
                    let mut mix = lo;
                    mix.zip_mut_with(&hi, |a, b| *a = (1.0 - frac) * *a + frac * *b);
                    mix
                } else {
                    lo
                };
                *frame = blurred.mapv(|v| ((v / q).floor() * q + q / 2.0).clamp(0.0, 255.0));
            }
        }
    }
}

fn clamp_box_blur(plane: &Array2<f64>, radius: usize) -> Array2<f64> {
    if radius == 0 {
        return plane.clone();
    }
    let (h, w) = plane.dim();
    let mut tmp = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let c0 = c.saturating_sub(radius);
            let c1 = (c + radius + 1).min(w);
            let mut acc = 0.0;
            for cc in c0..c1 {
                acc += plane[(r, cc)];
            }
            tmp[(r, c)] = acc / (c1 - c0) as f64;
        }
    }
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let r0 = r.saturating_sub(radius);
            let r1 = (r + radius + 1).min(h);
            let mut acc = 0.0;
            for rr in r0..r1 {
                acc += tmp[(rr, c)];
            }
            out[(r, c)] = acc / (r1 - r0) as f64;
        }
    }
    out
}
