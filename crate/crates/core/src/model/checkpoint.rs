//! Binary checkpoint format.
//!
//! ```text
//! "UPRC" | u32 version = 1 | u32 tensor count
//! per tensor: u16 name length | name (UTF-8) | u8 ndim | ndim × u32 dims | f32 payload
//! u32 JSON length | JSON {config, vocab, optimizer_step, meta}
//! ```
//! All integers and floats are little-endian. Optimizer moments, when
//! present, follow the parameters as `opt.m.<name>` and `opt.v.<name>`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::UniProcessor;
use crate::conditioning::PromptVocabulary;
use crate::error::{format_err, Result};
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"UPRC";
pub const VERSION: u32 = 1;

/// AdamW moments in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: UniProcessor,
    pub optimizer: Option<OptimizerState>,
    /// Free-form training metadata.
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: PromptVocabulary,
    optimizer_step: Option<u64>,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let store = ckpt.model.store();
    let mut tensors: Vec<(String, &Tensor<f32>)> = store.iter().map(|(n, t)| (n.to_string(), t)).collect();
    if let Some(opt) = &ckpt.optimizer {
        if opt.m.len() != store.len() || opt.v.len() != store.len() {
            return Err(format_err!("optimizer state does not match the parameter count"));
        }
        for (name, m) in store.names().iter().zip(&opt.m) {
            tensors.push((format!("opt.m.{name}"), m));
        }
        for (name, v) in store.names().iter().zip(&opt.v) {
            tensors.push((format!("opt.v.{name}"), v));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len()).map_err(|_| format_err!("parameter name too long: {name}"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(bytes);
        out.push(4);
        for d in t.shape().dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        config: ckpt.model.config().clone(),
        vocab: ckpt.model.vocab().clone(),
        optimizer_step: ckpt.optimizer.as_ref().map(|o| o.step),
        meta: ckpt.meta.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(format_err!("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format_err!("unsupported checkpoint version {version}"));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| format_err!("parameter name is not UTF-8"))?
            .to_string();
        let ndim = r.u8()? as usize;
        if ndim == 0 || ndim > 4 {
            return Err(format_err!("tensor {name:?} has unsupported rank {ndim}"));
        }
        let mut dims = [1usize; 4];
        for d in dims.iter_mut().skip(4 - ndim) {
            *d = r.u32()? as usize;
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err!("tensor {name:?} extents overflow"))?;
        let payload = r.take(numel.checked_mul(4).ok_or_else(|| format_err!("tensor too large"))?)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let tensor = Tensor::new(Shape::from_dims(dims), data).map_err(|e| format_err!("tensor {name:?}: {e}"))?;
        tensors.push((name, tensor));
    }
    let json_len = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(json_len)?).map_err(|e| format_err!("bad checkpoint metadata: {e}"))?;
    if r.pos != bytes.len() {
        return Err(format_err!("{} trailing bytes after checkpoint", bytes.len() - r.pos));
    }

    let (params, rest): (Vec<_>, Vec<_>) = tensors.into_iter().partition(|(n, _)| !n.starts_with("opt."));
    let model = UniProcessor::from_parts(header.config, header.vocab, params)?;
    let optimizer = match header.optimizer_step {
        None if rest.is_empty() => None,
        None => return Err(format_err!("optimizer tensors present without a step count")),
        Some(step) => {
            let n = model.store().len();
            if rest.len() != 2 * n {
                return Err(format_err!("expected {} optimizer tensors, found {}", 2 * n, rest.len()));
            }
            let mut m = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for (i, (name, t)) in rest.into_iter().enumerate() {
                let (prefix, target) = if i < n { ("opt.m.", &mut m) } else { ("opt.v.", &mut v) };
                let pname = &model.store().names()[i % n];
                if name != format!("{prefix}{pname}") || t.shape() != model.store().tensors()[i % n].shape() {
                    return Err(format_err!("optimizer tensor {name:?} does not match parameter {pname:?}"));
                }
                target.push(t);
            }
            Some(OptimizerState { step, m, v })
        }
    };
    Ok(Checkpoint {
        model,
        optimizer,
        meta: header.meta,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format_err!("truncated checkpoint at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
