//! Model persistence: one binary file holding a JSON structure header
//! followed by raw little-endian doubles for every parameter block.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{AvqError, Result};
use crate::heads::{QualityHead, ScoreMode, SoftmaxHead, SvrHead};
use crate::model::scaler::{FeatureScaler, ScalerMode};
use crate::model::stacked::{Aggregation, FeatureSelection, StackedQualityModel};
use crate::nn::{AutoencoderLayer, EncoderChain, TrainingHyperparams};

/// Leading bytes of every model file.
pub const MODEL_MAGIC: &[u8; 8] = b"AVQMODEL";

/// Bumped on any incompatible change to the file layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    selection: FeatureSelection,
    aggregation: Aggregation,
    scaler: ScalerHeader,
    chain: ChainHeader,
    head: HeadHeader,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalerHeader {
    mode: ScalerMode,
    rows: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainHeader {
    input_dim: usize,
    layers: Vec<LayerHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerHeader {
    input_dim: usize,
    hidden_dim: usize,
    hyper: TrainingHyperparams,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum HeadHeader {
    Softmax {
        input_dim: usize,
        num_classes: usize,
        score_mode: ScoreMode,
    },
    Svr {
        input_dim: usize,
        num_support_vectors: usize,
        bias: f64,
        gamma: f64,
        c: f64,
        epsilon: f64,
    },
}

/// Writes a model to one self-contained binary file.
pub fn save_model(path: &Path, model: &StackedQualityModel) -> Result<()> {
    model.validate()?;
    let header = ModelHeader {
        format_version: MODEL_FORMAT_VERSION,
        selection: model.selection,
        aggregation: model.aggregation,
        scaler: ScalerHeader {
            mode: model.scaler.mode,
            rows: model.scaler.rows(),
        },
        chain: ChainHeader {
            input_dim: model.chain.input_dim(),
            layers: model
                .chain
                .layers
                .iter()
                .map(|l| LayerHeader {
                    input_dim: l.input_dim(),
                    hidden_dim: l.hidden_dim(),
                    hyper: l.hyper.clone(),
                })
                .collect(),
        },
        head: match &model.head {
            QualityHead::Softmax(h) => HeadHeader::Softmax {
                input_dim: h.input_dim(),
                num_classes: h.num_classes(),
                score_mode: h.score_mode,
            },
            QualityHead::Svr(h) => HeadHeader::Svr {
                input_dim: h.input_dim(),
                num_support_vectors: h.support_vectors.ncols(),
                bias: h.bias,
                gamma: h.gamma,
                c: h.c,
                epsilon: h.epsilon,
            },
        },
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let ioe = |e| AvqError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(ioe)?);
    out.write_all(MODEL_MAGIC).map_err(ioe)?;
    out.write_u64::<LittleEndian>(header_bytes.len() as u64)
        .map_err(ioe)?;
    out.write_all(&header_bytes).map_err(ioe)?;

    let mut write_all = |values: &mut dyn Iterator<Item = &f64>| -> Result<()> {
        for v in values {
            out.write_f64::<LittleEndian>(*v).map_err(ioe)?;
        }
        Ok(())
    };
    write_all(&mut model.scaler.offset.iter())?;
    write_all(&mut model.scaler.scale.iter())?;
    for layer in &model.chain.layers {
        write_all(&mut layer.w_enc.iter())?;
        write_all(&mut layer.b_enc.iter())?;
        write_all(&mut layer.w_dec.iter())?;
        write_all(&mut layer.b_dec.iter())?;
    }
    match &model.head {
        QualityHead::Softmax(h) => {
            write_all(&mut h.w.iter())?;
            write_all(&mut h.b.iter())?;
            write_all(&mut h.class_centers.iter())?;
        }
        QualityHead::Svr(h) => {
            write_all(&mut h.support_vectors.iter())?;
            write_all(&mut h.coefficients.iter())?;
        }
    }
    out.flush().map_err(ioe)
}

struct BlobReader<'a> {
    rest: &'a [u8],
    path: &'a Path,
}

impl<'a> BlobReader<'a> {
    fn take(&mut self, len: usize) -> Result<Vec<f64>> {
        if self.rest.len() < len * 8 {
            return Err(AvqError::Serialization(format!(
                "model file {} is truncated",
                self.path.display()
            )));
        }
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.rest.read_f64::<LittleEndian>().expect("length checked"));
        }
        Ok(out)
    }

    fn take_matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let flat = self.take(rows * cols)?;
        Array2::from_shape_vec((rows, cols), flat)
            .map_err(|e| AvqError::Serialization(e.to_string()))
    }
}

/// Reads a model file written by `save_model`.
pub fn load_model(path: &Path) -> Result<StackedQualityModel> {
    let bytes = fs::read(path).map_err(|e| AvqError::io(path, e))?;
    let bad = |message: &str| {
        AvqError::Serialization(format!("model file {}: {}", path.display(), message))
    };
    if bytes.len() < MODEL_MAGIC.len() + 8 || &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(bad("missing AVQMODEL magic"));
    }
    let mut at = MODEL_MAGIC.len();
    let header_len =
        u64::from_le_bytes(bytes[at..at + 8].try_into().expect("fixed width")) as usize;
    at += 8;
    if bytes.len() < at + header_len {
        return Err(bad("header extends past end of file"));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[at..at + header_len])?;
    at += header_len;
    if header.format_version != MODEL_FORMAT_VERSION {
        return Err(bad(&format!(
            "format version {} unsupported (expected {})",
            header.format_version, MODEL_FORMAT_VERSION
        )));
    }

    let mut blobs = BlobReader {
        rest: &bytes[at..],
        path,
    };
    let offset = blobs.take(header.scaler.rows)?;
    let scale = blobs.take(header.scaler.rows)?;
    let scaler = FeatureScaler {
        mode: header.scaler.mode,
        offset,
        scale,
    };

    let mut layers = Vec::with_capacity(header.chain.layers.len());
    for spec in &header.chain.layers {
        let (d, h) = (spec.input_dim, spec.hidden_dim);
        layers.push(AutoencoderLayer {
            w_enc: blobs.take_matrix(h, d)?,
            b_enc: Array1::from_vec(blobs.take(h)?),
            w_dec: blobs.take_matrix(d, h)?,
            b_dec: Array1::from_vec(blobs.take(d)?),
            hyper: spec.hyper.clone(),
        });
    }
    let chain = EncoderChain::new(header.chain.input_dim, layers)?;

    let head = match header.head {
        HeadHeader::Softmax {
            input_dim,
            num_classes,
            score_mode,
        } => QualityHead::Softmax(SoftmaxHead {
            w: blobs.take_matrix(num_classes, input_dim)?,
            b: Array1::from_vec(blobs.take(num_classes)?),
            class_centers: blobs.take(num_classes)?,
            score_mode,
        }),
        HeadHeader::Svr {
            input_dim,
            num_support_vectors,
            bias,
            gamma,
            c,
            epsilon,
        } => QualityHead::Svr(SvrHead {
            support_vectors: blobs.take_matrix(input_dim, num_support_vectors)?,
            coefficients: blobs.take(num_support_vectors)?,
            bias,
            gamma,
            c,
            epsilon,
        }),
    };
    if !blobs.rest.is_empty() {
        return Err(bad("trailing bytes after parameter blocks"));
    }

    let model = StackedQualityModel {
        scaler,
        chain,
        head,
        selection: header.selection,
        aggregation: header.aggregation,
        format_version: header.format_version,
    };
    model.validate()?;
    Ok(model)
}
