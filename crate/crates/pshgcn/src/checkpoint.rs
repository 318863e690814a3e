//! Checkpoint file: magic `PSHGCKPT`, header length `u64` LE, a JSON header,
//! then every parameter as little-endian `f64` in model order (projection,
//! `f_θ` layers, filter weights in canonical word order, `f′_θ` layers).

use std::path::Path;

use pshgcn_core::nn::{F1Scores, Model, ModelConfig};
use pshgcn_core::{Matrix, Word};
use serde::{Deserialize, Serialize};

use crate::config::{ModeChoice, OperatorChoice};
use crate::error::{Error, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 8] = b"PSHGCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

impl From<F1Scores> for Scores {
    fn from(s: F1Scores) -> Self {
        Self {
            macro_f1: s.macro_f1,
            micro_f1: s.micro_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub input_dim: usize,
    /// Raw feature dimension per node type, in schema order.
    pub type_dims: Vec<usize>,
    pub alphabet: usize,
    pub order: usize,
    pub use_sos: bool,
    pub proj_dim: usize,
    pub f_theta: Vec<usize>,
    pub f_theta_prime: Vec<usize>,
    pub dropout: f64,
    pub words: Vec<Vec<usize>>,
    pub shapes: Vec<[usize; 2]>,
    pub operator: OperatorChoice,
    pub mode: ModeChoice,
    pub seed: u64,
    pub best_epoch: usize,
    pub val: Scores,
    pub test: Scores,
}

impl CheckpointHeader {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            proj_dim: self.proj_dim,
            f_theta: self.f_theta.clone(),
            f_theta_prime: self.f_theta_prime.clone(),
            dropout: self.dropout,
            use_sos: self.use_sos,
            order: self.order,
        }
    }
}

pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Model,
}

pub struct RunInfo {
    pub type_dims: Vec<usize>,
    pub operator: OperatorChoice,
    pub mode: ModeChoice,
    pub seed: u64,
    pub best_epoch: usize,
    pub val: Scores,
    pub test: Scores,
}

pub fn header_for(model: &Model, info: RunInfo) -> CheckpointHeader {
    CheckpointHeader {
        version: VERSION,
        input_dim: model.input_dim,
        type_dims: info.type_dims,
        alphabet: model.alphabet,
        order: model.config.order,
        use_sos: model.config.use_sos,
        proj_dim: model.config.proj_dim,
        f_theta: model.config.f_theta.clone(),
        f_theta_prime: model.config.f_theta_prime.clone(),
        dropout: model.config.dropout,
        words: model.words.iter().map(|w| w.ops().to_vec()).collect(),
        shapes: model.params.iter().map(|p| [p.rows(), p.cols()]).collect(),
        operator: info.operator,
        mode: info.mode,
        seed: info.seed,
        best_epoch: info.best_epoch,
        val: info.val,
        test: info.test,
    }
}

pub fn encode_checkpoint(header: &CheckpointHeader, model: &Model) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &model.params {
        for v in p.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, model: &Model) -> Result<()> {
    fsutil::write_atomic(path, &encode_checkpoint(header, model)?)
}

pub fn decode_checkpoint(path: &Path, bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| Error::format(path, m.to_string());
    if bytes.get(..8) != Some(MAGIC.as_slice()) {
        return Err(bad("bad magic, expected PSHGCKPT"));
    }
    let len = bytes
        .get(8..16)
        .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
        .ok_or_else(|| bad("truncated header length"))?;
    let json = 16usize
        .checked_add(len)
        .and_then(|end| bytes.get(16..end))
        .ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(json).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if header.version != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {}", header.version)));
    }
    let mut blob = &bytes[16 + len..];
    let mut params = Vec::with_capacity(header.shapes.len());
    for &[r, c] in &header.shapes {
        let k = r.checked_mul(c).and_then(|k| k.checked_mul(8)).ok_or_else(|| bad("shape overflow"))?;
        if blob.len() < k {
            return Err(bad("parameter blob shorter than the declared shapes"));
        }
        let values = blob[..k]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        params.push(Matrix::from_vec(r, c, values)?);
        blob = &blob[k..];
    }
    if !blob.is_empty() {
        return Err(bad("trailing bytes after the parameter blob"));
    }
    let words = header.words.iter().cloned().map(Word::new).collect();
    let model = Model::from_params(header.input_dim, header.alphabet, words, header.model_config(), params)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(Checkpoint { header, model })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(path, &fsutil::read(path)?)
}
