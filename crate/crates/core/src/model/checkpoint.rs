//! Tensor container: one compact JSON manifest line, then a little-endian
//! payload blob holding every tensor back to back in manifest order.
//!
//! Tensors whose values are all exactly representable in f32 are stored as
//! `"f32"`; anything else is stored as `"f64"` so reads are always bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

const FORMAT: &str = "langsep-tensors";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
    payload_bytes: usize,
}

/// Decoded contents of a tensor file.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    pub meta: serde_json::Value,
    pub entries: Vec<TensorEntry>,
    pub tensors: BTreeMap<String, Tensor>,
}

fn is_f32_exact(data: &[f64]) -> bool {
    data.iter().all(|&v| (v as f32) as f64 == v || v.is_nan())
}

pub fn encode_tensors(meta: &serde_json::Value, tensors: &[(String, &Tensor)]) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut payload = Vec::new();
    for (name, t) in tensors {
        let offset = payload.len();
        let dtype = if is_f32_exact(&t.data) {
            for v in &t.data {
                payload.extend_from_slice(&(*v as f32).to_le_bytes());
            }
            "f32"
        } else {
            for v in &t.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            "f64"
        };
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape.clone(),
            dtype: dtype.to_string(),
            offset,
        });
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        meta: meta.clone(),
        tensors: entries,
        payload_bytes: payload.len(),
    };
    let mut out = serde_json::to_vec(&manifest)?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_tensors(bytes: &[u8]) -> Result<TensorFile> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Corrupt("no manifest terminator".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::Corrupt(format!("bad manifest: {e}")))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(Error::Corrupt(format!(
            "unsupported format {} v{}",
            manifest.format, manifest.version
        )));
    }
    let payload = &bytes[nl + 1..];
    if payload.len() != manifest.payload_bytes {
        return Err(Error::Corrupt(format!(
            "payload is {} bytes, manifest declares {}",
            payload.len(),
            manifest.payload_bytes
        )));
    }
    let mut tensors = BTreeMap::new();
    let mut expected_offset = 0;
    for e in &manifest.tensors {
        let n: usize = e.shape.iter().product();
        let width = match e.dtype.as_str() {
            "f32" => 4,
            "f64" => 8,
            other => return Err(Error::Corrupt(format!("tensor `{}` has dtype {other}", e.name))),
        };
        let end = e.offset + n * width;
        if e.offset != expected_offset || end > payload.len() {
            return Err(Error::Corrupt(format!("tensor `{}` has an invalid offset", e.name)));
        }
        let raw = &payload[e.offset..end];
        let data: Vec<f64> = if width == 4 {
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect()
        } else {
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect()
        };
        expected_offset = end;
        if tensors
            .insert(
                e.name.clone(),
                Tensor {
                    shape: e.shape.clone(),
                    data,
                },
            )
            .is_some()
        {
            return Err(Error::Corrupt(format!("duplicate tensor `{}`", e.name)));
        }
    }
    if expected_offset != payload.len() {
        return Err(Error::Corrupt("trailing bytes after last tensor".into()));
    }
    Ok(TensorFile {
        meta: manifest.meta,
        entries: manifest.tensors,
        tensors,
    })
}

pub fn write_tensor_file(
    path: &Path,
    meta: &serde_json::Value,
    tensors: &[(String, &Tensor)],
) -> Result<()> {
    let bytes = encode_tensors(meta, tensors)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_file(path: &Path) -> Result<TensorFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensors(&bytes)
}
