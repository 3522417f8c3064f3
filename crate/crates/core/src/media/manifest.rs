//! Dataset manifests: one CSV row per audio-visual sequence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};

/// Distortion applied to the audio channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioDistortion {
    #[default]
    None,
    Noise,
    Chop,
    Clip,
    Echo,
}

/// Distortion applied to the video channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoDistortion {
    #[default]
    None,
    PacketLoss,
    FrameFreezing,
    Bitrate,
}

impl fmt::Display for AudioDistortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AudioDistortion::None => "none",
            AudioDistortion::Noise => "noise",
            AudioDistortion::Chop => "chop",
            AudioDistortion::Clip => "clip",
            AudioDistortion::Echo => "echo",
        };
        f.write_str(s)
    }
}

impl FromStr for AudioDistortion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(AudioDistortion::None),
            "noise" => Ok(AudioDistortion::Noise),
            "chop" => Ok(AudioDistortion::Chop),
            "clip" => Ok(AudioDistortion::Clip),
            "echo" => Ok(AudioDistortion::Echo),
            other => Err(format!("unknown audio distortion '{}'", other)),
        }
    }
}

impl fmt::Display for VideoDistortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VideoDistortion::None => "none",
            VideoDistortion::PacketLoss => "packet_loss",
            VideoDistortion::FrameFreezing => "frame_freezing",
            VideoDistortion::Bitrate => "bitrate",
        };
        f.write_str(s)
    }
}

impl FromStr for VideoDistortion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(VideoDistortion::None),
            "packet_loss" => Ok(VideoDistortion::PacketLoss),
            "frame_freezing" => Ok(VideoDistortion::FrameFreezing),
            "bitrate" => Ok(VideoDistortion::Bitrate),
            other => Err(format!("unknown video distortion '{}'", other)),
        }
    }
}

/// One audio-visual sequence with its subjective score and distortion labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub id: String,
    pub video_path: PathBuf,
    pub audio_path: PathBuf,
    pub fps: f64,
    pub mos: f64,
    pub audio_distortion: AudioDistortion,
    pub video_distortion: VideoDistortion,
    /// Effective distortion severity in [0, 1]; synthetic datasets only.
    pub severity: Option<f64>,
}

const HEADER: [&str; 7] = [
    "id",
    "video_path",
    "audio_path",
    "fps",
    "mos",
    "audio_distortion",
    "video_distortion",
];

fn field_err(row: u64, field: &str, message: impl Into<String>) -> AvqError {
    AvqError::Manifest {
        row: row as usize,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Loads a manifest CSV. Paths are resolved relative to the manifest's
/// directory and must exist. Rows keep file order; the row number in errors
/// is the line in the file.
pub fn load_manifest(path: &Path) -> Result<Vec<SequenceRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AvqError::io(path, std::io::Error::other(e.to_string())))?;
    let headers = reader
        .headers()
        .map_err(|e| AvqError::io(path, std::io::Error::other(e.to_string())))?
        .clone();
    let has_severity = match headers.len() {
        7 => false,
        8 if headers.get(7) == Some("severity") => true,
        _ => {
            return Err(field_err(
                1,
                "header",
                format!("expected columns {:?} (optionally + severity)", HEADER),
            ))
        }
    };
    for (i, expected) in HEADER.iter().enumerate() {
        if headers.get(i) != Some(*expected) {
            return Err(field_err(
                1,
                expected,
                format!("header column {} is {:?}", i, headers.get(i).unwrap_or("")),
            ));
        }
    }

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| AvqError::io(path, std::io::Error::other(e.to_string())))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize, name: &str| -> Result<&str> {
            row.get(i)
                .filter(|v| !v.is_empty())
                .ok_or_else(|| field_err(line, name, "missing value"))
        };

        let id = get(0, "id")?.to_string();
        let video_path = resolve(base, get(1, "video_path")?);
        if !video_path.exists() {
            return Err(field_err(
                line,
                "video_path",
                format!("{} does not exist", video_path.display()),
            ));
        }
        let audio_path = resolve(base, get(2, "audio_path")?);
        if !audio_path.exists() {
            return Err(field_err(
                line,
                "audio_path",
                format!("{} does not exist", audio_path.display()),
            ));
        }
        let fps: f64 = get(3, "fps")?
            .parse()
            .map_err(|_| field_err(line, "fps", "not a number"))?;
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(field_err(line, "fps", format!("{} is not positive", fps)));
        }
        let mos: f64 = get(4, "mos")?
            .parse()
            .map_err(|_| field_err(line, "mos", "not a number"))?;
        if !mos.is_finite() || !(1.0..=5.0).contains(&mos) {
            return Err(field_err(line, "mos", format!("{} outside [1, 5]", mos)));
        }
        let audio_distortion: AudioDistortion = get(5, "audio_distortion")?
            .parse()
            .map_err(|e| field_err(line, "audio_distortion", e))?;
        let video_distortion: VideoDistortion = get(6, "video_distortion")?
            .parse()
            .map_err(|e| field_err(line, "video_distortion", e))?;
        let severity = if has_severity {
            match row.get(7).filter(|v| !v.is_empty()) {
                Some(raw) => {
                    let s: f64 = raw
                        .parse()
                        .map_err(|_| field_err(line, "severity", "not a number"))?;
                    if !(0.0..=1.0).contains(&s) {
                        return Err(field_err(
                            line,
                            "severity",
                            format!("{} outside [0, 1]", s),
                        ));
                    }
                    Some(s)
                }
                None => None,
            }
        } else {
            None
        };

        records.push(SequenceRecord {
            id,
            video_path,
            audio_path,
            fps,
            mos,
            audio_distortion,
            video_distortion,
            severity,
        });
    }
    Ok(records)
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Writes records as a manifest CSV next to their media files. Paths are
/// emitted relative to the manifest directory when possible. The severity
/// column is included when any record carries one.
pub fn write_manifest(path: &Path, records: &[SequenceRecord]) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let with_severity = records.iter().any(|r| r.severity.is_some());
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| AvqError::io(path, std::io::Error::other(e.to_string())))?;
    let mut header: Vec<&str> = HEADER.to_vec();
    if with_severity {
        header.push("severity");
    }
    writer
        .write_record(&header)
        .map_err(|e| AvqError::io(path, std::io::Error::other(e.to_string())))?;
    for r in records {
        let rel = |p: &Path| -> String {
            p.strip_prefix(base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut fields = vec![
            r.id.clone(),
            rel(&r.video_path),
            rel(&r.audio_path),
            format!("{}", r.fps),
            format!("{}", r.mos),
            r.audio_distortion.to_string(),
            r.video_distortion.to_string(),
        ];
        if with_severity {
            fields.push(r.severity.map(|s| format!("{}", s)).unwrap_or_default());
        }
        writer
            .write_record(&fields)
            .map_err(|e| AvqError::io(path, std::io::Error::other(e.to_string())))?;
    }
    writer
        .flush()
        .map_err(|e| AvqError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn touch(path: &Path) {
        fs::write(path, b"x").unwrap();
    }

    fn write_lines(dir: &Path, name: &str, lines: &[&str]) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, lines.join("\n")).unwrap();
        p
    }

    #[test]
    fn round_trips_records() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("a.y4m"));
        touch(&dir.path().join("a.wav"));
        let records = vec![SequenceRecord {
            id: "seq0".into(),
            video_path: dir.path().join("a.y4m"),
            audio_path: dir.path().join("a.wav"),
            fps: 10.0,
            mos: 3.25,
            audio_distortion: AudioDistortion::Chop,
            video_distortion: VideoDistortion::None,
            severity: Some(0.5),
        }];
        let manifest = dir.path().join("manifest.csv");
        write_manifest(&manifest, &records).unwrap();
        let loaded = load_manifest(&manifest).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn header_only_gives_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_lines(
            dir.path(),
            "m.csv",
            &["id,video_path,audio_path,fps,mos,audio_distortion,video_distortion"],
        );
        assert_eq!(load_manifest(&p).unwrap(), vec![]);
    }

    #[test]
    fn mos_out_of_range_names_row_and_field() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("v.y4m"));
        touch(&dir.path().join("a.wav"));
        let p = write_lines(
            dir.path(),
            "m.csv",
            &[
                "id,video_path,audio_path,fps,mos,audio_distortion,video_distortion",
                "s0,v.y4m,a.wav,10,5.7,none,none",
            ],
        );
        match load_manifest(&p) {
            Err(AvqError::Manifest { row, field, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(field, "mos");
            }
            other => panic!("expected manifest error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn missing_media_file_fails_load() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("a.wav"));
        let p = write_lines(
            dir.path(),
            "m.csv",
            &[
                "id,video_path,audio_path,fps,mos,audio_distortion,video_distortion",
                "s0,gone.y4m,a.wav,10,3.0,none,none",
            ],
        );
        match load_manifest(&p) {
            Err(AvqError::Manifest { field, .. }) => assert_eq!(field, "video_path"),
            other => panic!("expected manifest error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn unknown_distortion_rejected() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("v.y4m"));
        touch(&dir.path().join("a.wav"));
        let p = write_lines(
            dir.path(),
            "m.csv",
            &[
                "id,video_path,audio_path,fps,mos,audio_distortion,video_distortion",
                "s0,v.y4m,a.wav,10,3.0,static,none",
            ],
        );
        match load_manifest(&p) {
            Err(AvqError::Manifest { field, .. }) => assert_eq!(field, "audio_distortion"),
            other => panic!("expected manifest error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn rows_preserve_file_order() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("v.y4m"));
        touch(&dir.path().join("a.wav"));
        let p = write_lines(
            dir.path(),
            "m.csv",
            &[
                "id,video_path,audio_path,fps,mos,audio_distortion,video_distortion",
                "zz,v.y4m,a.wav,10,3.0,none,none",
                "aa,v.y4m,a.wav,10,3.0,none,none",
            ],
        );
        let ids: Vec<String> = load_manifest(&p).unwrap().into_iter().map(|r| r.id).collect();
        assert_eq!(ids, vec!["zz", "aa"]);
    }
}
