//! The SPECMDL1 model file: 8-byte magic `SPECMDL1`, a little-endian u32
//! header length, a UTF-8 JSON header describing the model, then the raw
//! weight blocks as little-endian IEEE-754 f64 in header-declared order.
//! Files contain no timestamps unless one was explicitly stamped, so
//! identical training runs serialize to identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::cnn::{CnnConfig, CnnModel, CnnParams};
use crate::models::linear::{LinearKind, LinearModel};
use crate::models::{AnyModel, TrainOptions, TrainingMeta};

pub const MODEL_MAGIC: &[u8; 8] = b"SPECMDL1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDesc {
    name: String,
    shape: Vec<usize>,
}

impl BlockDesc {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    label_set: Vec<String>,
    normalize_pixels: bool,
    feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arch: Option<CnnConfig>,
    hyper: TrainOptions,
    training: TrainingMeta,
    blocks: Vec<BlockDesc>,
}

fn block_plan(model: &AnyModel) -> (Vec<BlockDesc>, Vec<Vec<f64>>) {
    match model {
        AnyModel::Linear(m) => (
            vec![
                BlockDesc {
                    name: "weights".into(),
                    shape: vec![m.n_outputs, m.feature_dim],
                },
                BlockDesc {
                    name: "bias".into(),
                    shape: vec![m.n_outputs],
                },
            ],
            vec![m.weights.clone(), m.bias.clone()],
        ),
        AnyModel::Cnn(m) => {
            let mut descs = Vec::new();
            let mut data = Vec::new();
            let mut c_in = m.config.input_c;
            for (i, kernels) in m.params.conv_kernels.iter().enumerate() {
                let c_out = m.config.conv_channels[i];
                descs.push(BlockDesc {
                    name: format!("conv{i}.kernels"),
                    shape: vec![3, 3, c_in, c_out],
                });
                data.push(kernels.clone());
                c_in = c_out;
            }
            for (i, bias) in m.params.conv_bias.iter().enumerate() {
                descs.push(BlockDesc {
                    name: format!("conv{i}.bias"),
                    shape: vec![m.config.conv_channels[i]],
                });
                data.push(bias.clone());
            }
            let flatten = m.config.flatten_len().expect("valid config");
            descs.push(BlockDesc {
                name: "dense.weights".into(),
                shape: vec![flatten, m.config.dense_units],
            });
            data.push(m.params.dense_w.clone());
            descs.push(BlockDesc {
                name: "dense.bias".into(),
                shape: vec![m.config.dense_units],
            });
            data.push(m.params.dense_b.clone());
            descs.push(BlockDesc {
                name: "output.weights".into(),
                shape: vec![m.config.dense_units, m.config.n_outputs()],
            });
            data.push(m.params.out_w.clone());
            descs.push(BlockDesc {
                name: "output.bias".into(),
                shape: vec![m.config.n_outputs()],
            });
            data.push(m.params.out_b.clone());
            (descs, data)
        }
    }
}

/// Serialize a model to the SPECMDL1 byte form.
pub fn encode_model(model: &AnyModel) -> Result<Vec<u8>> {
    let (blocks, data) = block_plan(model);
    let header = match model {
        AnyModel::Linear(m) => Header {
            kind: m.kind.as_str().to_string(),
            label_set: m.label_set.clone(),
            normalize_pixels: m.normalize_pixels,
            feature_dim: m.feature_dim,
            arch: None,
            hyper: m.hyper,
            training: m.training.clone(),
            blocks,
        },
        AnyModel::Cnn(m) => Header {
            kind: "cnn".to_string(),
            label_set: m.label_set.clone(),
            normalize_pixels: m.normalize_pixels,
            feature_dim: m.config.input_h * m.config.input_w * m.config.input_c,
            arch: Some(m.config.clone()),
            hyper: m.hyper,
            training: m.training.clone(),
            blocks,
        },
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + header_json.len() + data.iter().map(|d| d.len() * 8).sum::<usize>());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for block in &data {
        for &v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parse a SPECMDL1 byte stream back into a model.
pub fn decode_model(bytes: &[u8]) -> Result<AnyModel> {
    if bytes.len() < 12 || &bytes[..8] != MODEL_MAGIC {
        return Err(Error::format("not a SPECMDL1 model file"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body_start = 12 + header_len;
    if bytes.len() < body_start {
        return Err(Error::format("model header truncated"));
    }
    let header: Header = serde_json::from_slice(&bytes[12..body_start])?;

    let expected: usize = header.blocks.iter().map(BlockDesc::len).sum();
    let body = &bytes[body_start..];
    if body.len() != expected * 8 {
        return Err(Error::format(format!(
            "weight payload is {} bytes, header declares {}",
            body.len(),
            expected * 8
        )));
    }
    let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(header.blocks.len());
    let mut offset = 0;
    for desc in &header.blocks {
        let n = desc.len();
        let mut block = Vec::with_capacity(n);
        for i in 0..n {
            let at = (offset + i) * 8;
            block.push(f64::from_le_bytes(body[at..at + 8].try_into().expect("8 bytes")));
        }
        offset += n;
        blocks.push(block);
    }

    match header.kind.as_str() {
        "logreg" | "svm" | "linreg" => {
            if header.blocks.len() != 2
                || header.blocks[0].name != "weights"
                || header.blocks[1].name != "bias"
            {
                return Err(Error::format("unexpected block layout for a linear model"));
            }
            let n_outputs = header.blocks[0].shape[0];
            if header.blocks[0].shape != vec![n_outputs, header.feature_dim]
                || header.blocks[1].shape != vec![n_outputs]
            {
                return Err(Error::format("linear block shapes disagree with header"));
            }
            let kind = match header.kind.as_str() {
                "logreg" => LinearKind::Logreg,
                "svm" => LinearKind::Svm,
                _ => LinearKind::Linreg,
            };
            let bias = blocks.pop().expect("two blocks");
            let weights = blocks.pop().expect("two blocks");
            Ok(AnyModel::Linear(LinearModel {
                kind,
                n_outputs,
                feature_dim: header.feature_dim,
                weights,
                bias,
                label_set: header.label_set,
                normalize_pixels: header.normalize_pixels,
                hyper: header.hyper,
                training: header.training,
            }))
        }
        "cnn" => {
            let config = header
                .arch
                .ok_or_else(|| Error::format("cnn model file without arch header"))?;
            config.shape_chain()?;
            let mut params = CnnParams::zeros(&config)?;
            let stages = config.conv_channels.len();
            if blocks.len() != 2 * stages + 4 {
                return Err(Error::format("unexpected block count for a cnn model"));
            }
            let mut iter = blocks.into_iter();
            for stage in 0..stages {
                let kernels = iter.next().expect("counted");
                if kernels.len() != params.conv_kernels[stage].len() {
                    return Err(Error::format(format!("conv{stage} kernel size mismatch")));
                }
                params.conv_kernels[stage] = kernels;
            }
            for stage in 0..stages {
                let bias = iter.next().expect("counted");
                if bias.len() != params.conv_bias[stage].len() {
                    return Err(Error::format(format!("conv{stage} bias size mismatch")));
                }
                params.conv_bias[stage] = bias;
            }
            let dense_w = iter.next().expect("counted");
            let dense_b = iter.next().expect("counted");
            let out_w = iter.next().expect("counted");
            let out_b = iter.next().expect("counted");
            if dense_w.len() != params.dense_w.len()
                || dense_b.len() != params.dense_b.len()
                || out_w.len() != params.out_w.len()
                || out_b.len() != params.out_b.len()
            {
                return Err(Error::format("dense/output block size mismatch"));
            }
            params.dense_w = dense_w;
            params.dense_b = dense_b;
            params.out_w = out_w;
            params.out_b = out_b;
            if header.label_set.len() != config.classes {
                return Err(Error::format("label set size disagrees with arch"));
            }
            Ok(AnyModel::Cnn(CnnModel {
                config,
                params,
                label_set: header.label_set,
                normalize_pixels: header.normalize_pixels,
                hyper: header.hyper,
                training: header.training,
            }))
        }
        other => Err(Error::format(format!("unknown model kind {other:?}"))),
    }
}

pub fn save_model(model: &AnyModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::format(format!("cannot read {}: {e}", path.display())))?;
    decode_model(&bytes)
}
