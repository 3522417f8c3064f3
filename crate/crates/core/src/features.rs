//! On-disk cache for extracted feature matrices: a flat binary blob of
//! little-endian doubles in column-major order plus a JSON sidecar
//! describing its shape and provenance.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};

/// Bumped whenever extraction output changes incompatibly; cached matrices
/// from another version are rejected on read.
pub const EXTRACTOR_VERSION: u32 = 1;

/// Metadata stored next to a cached feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub rows: usize,
    pub cols: usize,
    pub feature_names: Vec<String>,
    pub extractor_version: u32,
    pub source_id: String,
}

/// Sidecar path for a cache file: the cache path with ".json" appended.
pub fn sidecar_path(cache: &Path) -> PathBuf {
    let mut name = cache.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes a feature matrix and its sidecar. `feature_names` must have one
/// entry per row.
pub fn write_feature_cache(
    path: &Path,
    data: &Array2<f64>,
    feature_names: &[String],
    source_id: &str,
) -> Result<()> {
    let (rows, cols) = data.dim();
    if feature_names.len() != rows {
        return Err(AvqError::Validation(format!(
            "{} feature names for a {}-row matrix",
            feature_names.len(),
            rows
        )));
    }
    let sidecar = FeatureSidecar {
        rows,
        cols,
        feature_names: feature_names.to_vec(),
        extractor_version: EXTRACTOR_VERSION,
        source_id: source_id.to_string(),
    };

    let ioe = |e| AvqError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(ioe)?);
    for j in 0..cols {
        for i in 0..rows {
            out.write_f64::<LittleEndian>(data[(i, j)]).map_err(ioe)?;
        }
    }
    out.flush().map_err(ioe)?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&sidecar)?)
        .map_err(|e| AvqError::io(side, e))?;
    Ok(())
}

/// Reads a cached feature matrix and its sidecar, verifying blob size and
/// extractor version.
pub fn read_feature_cache(path: &Path) -> Result<(Array2<f64>, FeatureSidecar)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| AvqError::io(side, e))?;
    let sidecar: FeatureSidecar = serde_json::from_str(&text)?;
    if sidecar.extractor_version != EXTRACTOR_VERSION {
        return Err(AvqError::Validation(format!(
            "feature cache {} has extractor version {}, expected {}",
            path.display(),
            sidecar.extractor_version,
            EXTRACTOR_VERSION
        )));
    }
    if sidecar.feature_names.len() != sidecar.rows {
        return Err(AvqError::Validation(format!(
            "feature cache {} sidecar lists {} names for {} rows",
            path.display(),
            sidecar.feature_names.len(),
            sidecar.rows
        )));
    }

    let ioe = |e| AvqError::io(path, e);
    let mut blob = Vec::new();
    BufReader::new(File::open(path).map_err(ioe)?)
        .read_to_end(&mut blob)
        .map_err(ioe)?;
    let expected = sidecar.rows * sidecar.cols * 8;
    if blob.len() != expected {
        return Err(AvqError::Validation(format!(
            "feature cache {} holds {} bytes, expected {}",
            path.display(),
            blob.len(),
            expected
        )));
    }

    let mut cursor = blob.as_slice();
    let mut data = Array2::zeros((sidecar.rows, sidecar.cols));
    for j in 0..sidecar.cols {
        for i in 0..sidecar.rows {
            data[(i, j)] = cursor.read_f64::<LittleEndian>().map_err(ioe)?;
        }
    }
    Ok((data, sidecar))
}
