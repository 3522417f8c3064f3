//! Raw media IO: Y4M and headerless YUV video, PCM WAV audio.
//!
//! These formats carry no codec state, so tests and the synthetic dataset
//! generator stay bit-exact. Luma planes are surfaced as f64 matrices in
//! [0, 255]; audio as mono f64 samples in [-1, 1].

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{AvqError, Result};
use crate::media::manifest::SequenceRecord;

/// Decoded sequence: m luma planes plus aligned mono audio.
#[derive(Debug, Clone)]
pub struct RawMedia {
    pub frames: Vec<Array2<f64>>,
    pub audio: Vec<f64>,
    pub sample_rate: u32,
    pub fps: f64,
}

impl RawMedia {
    /// Frame count m.
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

fn media_err(path: &Path, message: impl Into<String>) -> AvqError {
    AvqError::media(path, message.into())
}

/// Writes luma frames as Y4M with the mono (luma-only) colorspace tag.
/// Values are clamped to [0, 255] and rounded.
pub fn write_y4m(path: &Path, frames: &[Array2<f64>], fps: f64) -> Result<()> {
    if frames.is_empty() {
        return Err(media_err(path, "no frames to write"));
    }
    let (h, w) = frames[0].dim();
    let (num, den) = fps_to_ratio(fps);
    let file = fs::File::create(path).map_err(|e| AvqError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write!(out, "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 Cmono\n", w, h, num, den)
        .map_err(|e| AvqError::io(path, e))?;
    for frame in frames {
        if frame.dim() != (h, w) {
            return Err(media_err(path, "frames differ in size"));
        }
        out.write_all(b"FRAME\n").map_err(|e| AvqError::io(path, e))?;
        let mut row_buf = Vec::with_capacity(w);
        for r in 0..h {
            row_buf.clear();
            for c in 0..w {
                row_buf.push(frame[(r, c)].clamp(0.0, 255.0).round() as u8);
            }
            out.write_all(&row_buf).map_err(|e| AvqError::io(path, e))?;
        }
    }
    out.flush().map_err(|e| AvqError::io(path, e))?;
    Ok(())
}

fn fps_to_ratio(fps: f64) -> (u32, u32) {
    let num = (fps * 1000.0).round() as u32;
    let g = gcd(num, 1000);
    (num / g, 1000 / g)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Reads a Y4M file; returns the luma planes and the header frame rate.
/// Mono, 4:2:0, and 4:4:4 colorspaces are accepted; chroma is discarded.
pub fn read_y4m(path: &Path) -> Result<(Vec<Array2<f64>>, f64)> {
    let file = fs::File::open(path).map_err(|e| AvqError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = Vec::new();
    reader
        .read_until(b'\n', &mut header)
        .map_err(|e| AvqError::io(path, e))?;
    let header = String::from_utf8_lossy(&header);
    if !header.starts_with("YUV4MPEG2") {
        return Err(media_err(path, "missing YUV4MPEG2 signature"));
    }
    let mut width = 0usize;
    let mut height = 0usize;
    let mut fps = 0.0f64;
    let mut colorspace = "420".to_string();
    for token in header.split_whitespace().skip(1) {
        match token.as_bytes()[0] {
            b'W' => width = token[1..].parse().map_err(|_| media_err(path, "bad W token"))?,
            b'H' => height = token[1..].parse().map_err(|_| media_err(path, "bad H token"))?,
            b'F' => {
                let (num, den) = token[1..]
                    .split_once(':')
                    .ok_or_else(|| media_err(path, "bad F token"))?;
                let num: f64 = num.parse().map_err(|_| media_err(path, "bad F token"))?;
                let den: f64 = den.parse().map_err(|_| media_err(path, "bad F token"))?;
                if den <= 0.0 {
                    return Err(media_err(path, "bad F token"));
                }
                fps = num / den;
            }
            b'C' => colorspace = token[1..].to_string(),
            _ => {}
        }
    }
    if width == 0 || height == 0 {
        return Err(media_err(path, "header lacks frame dimensions"));
    }
    let chroma_bytes = if colorspace.starts_with("mono") {
        0
    } else if colorspace.starts_with("420") {
        (width / 2) * (height / 2) * 2
    } else if colorspace.starts_with("444") {
        width * height * 2
    } else {
        return Err(media_err(
            path,
            format!("unsupported colorspace C{}", colorspace),
        ));
    };

    let mut frames = Vec::new();
    let mut luma = vec![0u8; width * height];
    let mut chroma = vec![0u8; chroma_bytes];
    loop {
        let mut frame_line = Vec::new();
        let n = reader
            .read_until(b'\n', &mut frame_line)
            .map_err(|e| AvqError::io(path, e))?;
        if n == 0 {
            break;
        }
        if !frame_line.starts_with(b"FRAME") {
            return Err(media_err(path, "expected FRAME marker"));
        }
        reader
            .read_exact(&mut luma)
            .map_err(|e| AvqError::io(path, e))?;
        if chroma_bytes > 0 {
            reader
                .read_exact(&mut chroma)
                .map_err(|e| AvqError::io(path, e))?;
        }
        frames.push(plane_from_bytes(&luma, height, width));
    }
    Ok((frames, fps))
}

fn plane_from_bytes(bytes: &[u8], h: usize, w: usize) -> Array2<f64> {
    Array2::from_shape_fn((h, w), |(r, c)| bytes[r * w + c] as f64)
}

/// Reads headerless planar YUV. Dimensions come from a `_WxH` suffix in the
/// file name (e.g. clip_640x480.yuv). Files sized as 4:2:0 are read as such;
/// otherwise the file is treated as luma-only gray.
pub fn read_raw_yuv(path: &Path) -> Result<Vec<Array2<f64>>> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| media_err(path, "unreadable file name"))?;
    let dims = stem
        .rsplit('_')
        .next()
        .and_then(|tail| tail.split_once('x'))
        .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)));
    let (width, height) = dims.ok_or_else(|| {
        media_err(
            path,
            "raw yuv needs dimensions in the file name, e.g. clip_640x480.yuv",
        )
    })?;
    let bytes = fs::read(path).map_err(|e| AvqError::io(path, e))?;
    let luma_size = width * height;
    let frame_420 = luma_size + (width / 2) * (height / 2) * 2;
    let frame_size = if frame_420 > 0 && bytes.len() % frame_420 == 0 {
        frame_420
    } else if luma_size > 0 && bytes.len() % luma_size == 0 {
        luma_size
    } else {
        return Err(media_err(
            path,
            format!(
                "file size {} does not divide into {}x{} frames",
                bytes.len(),
                width,
                height
            ),
        ));
    };
    let frames = bytes
        .chunks_exact(frame_size)
        .map(|chunk| plane_from_bytes(&chunk[..luma_size], height, width))
        .collect();
    Ok(frames)
}

/// Writes mono PCM WAV, 16-bit little-endian. Samples are clamped to
/// [-1, 1].
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| AvqError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let data_len = (samples.len() * 2) as u32;
    let io = |e| AvqError::io(path, e);
    out.write_all(b"RIFF").map_err(io)?;
    out.write_u32::<LittleEndian>(36 + data_len).map_err(io)?;
    out.write_all(b"WAVE").map_err(io)?;
    out.write_all(b"fmt ").map_err(io)?;
    out.write_u32::<LittleEndian>(16).map_err(io)?;
    out.write_u16::<LittleEndian>(1).map_err(io)?; // PCM
    out.write_u16::<LittleEndian>(1).map_err(io)?; // mono
    out.write_u32::<LittleEndian>(sample_rate).map_err(io)?;
    out.write_u32::<LittleEndian>(sample_rate * 2).map_err(io)?;
    out.write_u16::<LittleEndian>(2).map_err(io)?;
    out.write_u16::<LittleEndian>(16).map_err(io)?;
    out.write_all(b"data").map_err(io)?;
    out.write_u32::<LittleEndian>(data_len).map_err(io)?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.write_i16::<LittleEndian>(v).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

/// Reads a PCM WAV file (16-bit integer samples); multi-channel input is
/// averaged down to mono.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let bytes = fs::read(path).map_err(|e| AvqError::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(media_err(path, "not a RIFF/WAVE file"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(media_err(path, "fmt chunk too short"));
                }
                let mut cur = std::io::Cursor::new(body);
                let format = cur.read_u16::<LittleEndian>().unwrap();
                let channels = cur.read_u16::<LittleEndian>().unwrap();
                let rate = cur.read_u32::<LittleEndian>().unwrap();
                cur.set_position(14);
                let bits = cur.read_u16::<LittleEndian>().unwrap();
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos += 8 + size + (size & 1);
    }
    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| media_err(path, "missing fmt chunk"))?;
    let data = data.ok_or_else(|| media_err(path, "missing data chunk"))?;
    if format != 1 || bits != 16 {
        return Err(media_err(
            path,
            format!("unsupported WAV encoding (format {}, {} bits)", format, bits),
        ));
    }
    if channels == 0 {
        return Err(media_err(path, "zero channels"));
    }
    let ch = channels as usize;
    let frame_bytes = 2 * ch;
    let n = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for c in 0..ch {
            let off = i * frame_bytes + c * 2;
            let v = i16::from_le_bytes([data[off], data[off + 1]]) as f64;
            acc += v / 32768.0;
        }
        samples.push(acc / ch as f64);
    }
    Ok((samples, rate))
}

/// Loads the media behind a manifest record and checks audio/video
/// alignment: at least 2 frames, and audio covering the video duration to
/// within one frame period.
pub fn load_media(record: &SequenceRecord) -> Result<RawMedia> {
    let ext = record
        .video_path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let frames = match ext.as_str() {
        "y4m" => {
            let (frames, header_fps) = read_y4m(&record.video_path)?;
            if header_fps > 0.0 && (header_fps - record.fps).abs() > 1e-6 {
                log::warn!(
                    "{}: manifest fps {} overrides container fps {}",
                    record.id,
                    record.fps,
                    header_fps
                );
            }
            frames
        }
        "yuv" => read_raw_yuv(&record.video_path)?,
        other => {
            return Err(media_err(
                &record.video_path,
                format!("unsupported video container '{}'", other),
            ))
        }
    };
    if frames.len() < 2 {
        return Err(media_err(
            &record.video_path,
            format!("need at least 2 frames, got {}", frames.len()),
        ));
    }
    let (audio, sample_rate) = read_wav(&record.audio_path)?;
    let video_secs = frames.len() as f64 / record.fps;
    let audio_secs = audio.len() as f64 / sample_rate as f64;
    if audio_secs + 1.0 / record.fps < video_secs - 1e-9 {
        return Err(media_err(
            &record.audio_path,
            format!(
                "audio covers {:.3}s of a {:.3}s video (tolerance one frame period)",
                audio_secs, video_secs
            ),
        ));
    }
    Ok(RawMedia {
        frames,
        audio,
        sample_rate,
        fps: record.fps,
    })
}
