//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   8 bytes   magic "CLFCKPT1"
//! offset 8   u64       header length L
//! offset 16  L bytes   UTF-8 JSON header
//!                      {"config": ModelConfig, "vocab": Vocabulary | null,
//!                       "tensors": [{"name", "rows", "cols"}, ...]}
//! then, for each header tensor in order, rows*cols f64 values, row-major
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::Parameters;
use super::tensor::Tensor;
use crate::codeparse::Vocabulary;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"CLFCKPT1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Option<Vocabulary>,
    tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint<S: Scalar>(
    cfg: &ModelConfig,
    params: &Parameters<S>,
    vocab: Option<&Vocabulary>,
) -> Result<Vec<u8>> {
    let names = Parameters::<S>::names(cfg);
    let tensors = params.tensors();
    let header = Header {
        config: cfg.clone(),
        vocab: vocab.cloned(),
        tensors: names
            .into_iter()
            .zip(&tensors)
            .map(|(name, t)| TensorEntry {
                name,
                rows: t.rows,
                cols: t.cols,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + params.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    Ok(out)
}

pub struct Checkpoint<S> {
    pub config: ModelConfig,
    pub params: Parameters<S>,
    pub vocab: Option<Vocabulary>,
}

pub fn decode_checkpoint<S: Scalar>(bytes: &[u8], origin: &Path) -> Result<Checkpoint<S>> {
    let bad = |reason: &str| Error::Format {
        path: origin.to_owned(),
        reason: reason.to_owned(),
    };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    header.config.validate()?;

    let expected = Parameters::<S>::names(&header.config);
    if expected.len() != header.tensors.len()
        || expected.iter().zip(&header.tensors).any(|(a, b)| *a != b.name)
    {
        return Err(bad("tensor list does not match the configuration"));
    }
    let mut cursor = 16 + hlen;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let count = entry.rows * entry.cols;
        let raw = bytes
            .get(cursor..cursor + count * 8)
            .ok_or_else(|| bad(&format!("truncated tensor {}", entry.name)))?;
        cursor += count * 8;
        let data = raw
            .chunks_exact(8)
            .map(|c| S::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        tensors.push(Tensor::from_vec(entry.rows, entry.cols, data));
    }
    if cursor != bytes.len() {
        return Err(bad("trailing bytes after last tensor"));
    }
    let params = Parameters::from_tensors(&header.config, tensors)?;
    if !params.all_finite() {
        return Err(bad("non-finite parameter values"));
    }
    Ok(Checkpoint {
        config: header.config,
        params,
        vocab: header.vocab,
    })
}

pub fn save_checkpoint<S: Scalar>(
    path: &Path,
    cfg: &ModelConfig,
    params: &Parameters<S>,
    vocab: Option<&Vocabulary>,
) -> Result<()> {
    let bytes = encode_checkpoint(cfg, params, vocab)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<Checkpoint<S>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
