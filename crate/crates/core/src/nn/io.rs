//! Model file layout (all integers little-endian):
//!
//! ```text
//! magic       8 bytes   "MRSQCNN\0"
//! version     u32       FORMAT_VERSION
//! header_len  u32
//! header      JSON, header_len bytes (architecture, seed, scaler, provenance,
//!             tensor names and shapes)
//! per tensor, in header order:
//!   ndim      u32
//!   dims      ndim × u32
//!   values    product(dims) × f32
//! ```

use serde::{Deserialize, Serialize};

use super::model::{ArchConfig, FusionCnnModel, PARAM_NAMES};
use super::{NnError, Tensor};
use crate::features::ScalingParams;
use crate::provenance::Provenance;

pub const MAGIC: &[u8; 8] = b"MRSQCNN\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub architecture: ArchConfig,
    pub seed: u64,
    pub scaler: Option<ScalingParams>,
    pub provenance: Option<Provenance>,
    pub tensors: Vec<TensorSpec>,
}

pub fn save_model(model: &FusionCnnModel, provenance: Option<&Provenance>) -> Vec<u8> {
    let header = ModelHeader {
        architecture: model.config().clone(),
        seed: model.seed(),
        scaler: model.scaler.clone(),
        provenance: provenance.cloned(),
        tensors: PARAM_NAMES
            .iter()
            .zip(model.params())
            .map(|(n, t)| TensorSpec {
                name: n.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + model.param_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.params() {
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.values() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::ModelFormat(msg.into())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| bad("truncated model file"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn load_model(bytes: &[u8]) -> Result<(FusionCnnModel, ModelHeader), NnError> {
    let mut c = Cursor { data: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(bad("not a model file"));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported model format version {version}")));
    }
    let len = c.u32()? as usize;
    let header: ModelHeader = serde_json::from_slice(c.take(len)?).map_err(|e| bad(e.to_string()))?;
    let expected = header.architecture.param_shapes();
    if header.tensors.len() != expected.len() {
        return Err(bad("tensor count disagrees with architecture"));
    }
    let mut params = Vec::with_capacity(expected.len());
    for (spec, shape) in header.tensors.iter().zip(&expected) {
        let ndim = c.u32()? as usize;
        if ndim != shape.len() {
            return Err(bad(format!("tensor {} has {ndim} dims", spec.name)));
        }
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(c.u32()? as usize);
        }
        if dims != *shape || spec.shape != *shape {
            return Err(bad(format!(
                "tensor {} has shape {dims:?}, expected {shape:?}",
                spec.name
            )));
        }
        let n: usize = dims.iter().product();
        let raw = c.take(n.checked_mul(4).ok_or_else(|| bad("tensor too large"))?)?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        params.push(Tensor::new(dims, values)?);
    }
    if c.pos != bytes.len() {
        return Err(bad("trailing bytes after last tensor"));
    }
    if let Some(s) = &header.scaler {
        s.validate().map_err(|e| bad(e.to_string()))?;
    }
    let model = FusionCnnModel::from_parts(header.architecture.clone(), header.seed, params, header.scaler.clone())?;
    Ok((model, header))
}
