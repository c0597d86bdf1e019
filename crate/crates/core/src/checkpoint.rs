//! Checkpoint container: an 8-byte magic, a little-endian `u64` header
//! length, a JSON header, then every parameter tensor as little-endian
//! `f32` in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::NormRanges;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::nn::Params;

pub const MAGIC: &[u8; 8] = b"STDSCKPT";
const MAX_HEADER: u64 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub model: ModelConfig,
    pub seed: u64,
    pub iteration: usize,
    #[serde(default)]
    pub norm_ranges: Option<NormRanges>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Model<f32>,
}

impl Checkpoint {
    pub fn new(model: Model<f32>, seed: u64, iteration: usize, norm_ranges: Option<NormRanges>) -> Self {
        let tensors = model
            .named()
            .into_iter()
            .map(|(name, t)| TensorEntry {
                name,
                shape: t.shape().to_vec(),
            })
            .collect();
        Checkpoint {
            header: CheckpointHeader {
                version: 1,
                model: model.config.clone(),
                seed,
                iteration,
                norm_ranges,
                tensors,
            },
            model,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(16 + header.len() + 4 * self.model.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in self.model.named() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |d: String| Error::format("checkpoint", d);
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if hlen > MAX_HEADER || hlen > (bytes.len() - 16) as u64 {
            return Err(bad(format!("header length {hlen} exceeds file")));
        }
        let hend = 16 + hlen as usize;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..hend])?;
        if header.version != 1 {
            return Err(bad(format!("unsupported version {}", header.version)));
        }
        if let Some(n) = &header.norm_ranges {
            n.validate().map_err(|e| bad(e.to_string()))?;
        }
        let mut model = Model::<f32>::zeros(header.model.clone()).map_err(|e| bad(e.to_string()))?;
        let mut slots = model.named_mut();
        if slots.len() != header.tensors.len() {
            return Err(bad(format!(
                "{} tensors listed, model has {}",
                header.tensors.len(),
                slots.len()
            )));
        }
        let mut pos = hend;
        for ((name, t), entry) in slots.iter_mut().zip(&header.tensors) {
            if *name != entry.name || t.shape() != entry.shape.as_slice() {
                return Err(bad(format!(
                    "tensor {} {:?} does not match expected {name} {:?}",
                    entry.name,
                    entry.shape,
                    t.shape()
                )));
            }
            let n = t.len();
            let end = pos + 4 * n;
            if end > bytes.len() {
                return Err(bad(format!("truncated at tensor {name}")));
            }
            for (v, c) in t.data_mut().iter_mut().zip(bytes[pos..end].chunks_exact(4)) {
                *v = f32::from_le_bytes(c.try_into().unwrap());
            }
            pos = end;
        }
        if pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
        }
        drop(slots);
        if !model.all_finite() {
            return Err(bad("non-finite parameter values".into()));
        }
        Ok(Checkpoint { header, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.header.model
    }
}
