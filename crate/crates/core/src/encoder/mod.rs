//! Small trainable masked-sequence encoder.
//!
//! A pre-layer-norm transformer with learned absolute positions and a
//! BERT-style MLM head (dense, GELU, layer norm, tied output plus bias).
//! Gradients are computed by hand; [`grad_check`] verifies them against
//! central finite differences.

mod float;
pub mod grad_check;
mod model;
mod params;

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use float::Float;
pub use grad_check::{grad_check, LossKind};
pub use model::{ForwardOutput, HeadTrace, Trace};
pub use params::{EncoderParams, LayerParams, ParamTensor, INIT_STD};

/// Prompt length every template pads to.
pub const PROMPT_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
    pub tie_output: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            max_len: PROMPT_LEN,
            vocab_size: 0,
            dropout_rate: 0.1,
            tie_output: true,
        }
    }
}

impl EncoderConfig {
    /// Reference shapes of the 12-layer, 768-dim pretrained encoders.
    pub fn base_768(vocab_size: usize) -> Self {
        EncoderConfig {
            d_model: 768,
            n_layers: 12,
            n_heads: 12,
            d_ff: 3072,
            vocab_size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return bad("dimensions must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.max_len < PROMPT_LEN {
            return bad(format!(
                "max_len {} below prompt length {PROMPT_LEN}",
                self.max_len
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0,1)", self.dropout_rate));
        }
        Ok(())
    }
}

pub fn init_params<F: Float>(config: &EncoderConfig, seed: u64) -> Result<EncoderParams<F>> {
    EncoderParams::init(config, seed)
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "F: Float")]
struct CheckpointFile<F> {
    format_version: u32,
    precision: String,
    params: EncoderParams<F>,
}

fn precision_name<F: Float>() -> &'static str {
    if std::mem::size_of::<F>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

/// Serializes parameters to JSON. Floats are written in shortest
/// round-trip form, so reading back is bit-exact.
pub fn checkpoint_bytes<F: Float>(params: &EncoderParams<F>) -> Result<Vec<u8>> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        precision: precision_name::<F>().to_string(),
        params: params.clone(),
    };
    Ok(serde_json::to_vec(&file)?)
}

pub fn save_checkpoint<F: Float>(
    params: &EncoderParams<F>,
    path: impl AsRef<Path>,
) -> Result<String> {
    let bytes = checkpoint_bytes(params)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_checkpoint<F: Float>(path: impl AsRef<Path>) -> Result<EncoderParams<F>> {
    let file: CheckpointFile<F> = serde_json::from_reader(BufReader::new(fs::File::open(path)?))?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {}",
            file.format_version
        )));
    }
    if file.precision != precision_name::<F>() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} tensors, requested {}",
            file.precision,
            precision_name::<F>()
        )));
    }
    Ok(file.params)
}

/// Hex SHA-256 of the serialized parameters.
pub fn checkpoint_hash<F: Float>(params: &EncoderParams<F>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(checkpoint_bytes(params)?)))
}
