//! Checkpoint file: `SPKLCKPT1\n`, header length (u32 LE), JSON header holding
//! the architecture description and the ordered tensor directory, the tensors
//! as little-endian `f32` arrays in that order, then SHA-256 of all preceding bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 10] = b"SPKLCKPT1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointFile {
    pub architecture: serde_json::Value,
    pub arrays: Vec<NamedArray>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

pub fn write_checkpoint(file: &CheckpointFile, path: impl AsRef<Path>) -> Result<()> {
    for a in &file.arrays {
        if a.shape.iter().product::<usize>() != a.data.len() {
            return Err(Error::Shape(format!("array `{}` does not match shape {:?}", a.name, a.shape)));
        }
    }
    let header = Header {
        architecture: file.architecture.clone(),
        tensors: file.arrays.iter().map(|a| Entry { name: a.name.clone(), shape: a.shape.clone() }).collect(),
    };
    let text = serde_json::to_vec(&header)?;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(text.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&text);
    for a in &file.arrays {
        for v in &a.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<CheckpointFile> {
    let path = path.as_ref();
    let name = path.display();
    let bytes = fs::read(path)?;
    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        if bytes.starts_with(b"SPKLCKPT") {
            return Err(Error::Version(format!("{name}: unsupported checkpoint version")));
        }
        return Err(Error::Format(format!("{name}: missing SPKLCKPT1 magic")));
    }
    let mut pos = CHECKPOINT_MAGIC.len();
    let len = bytes
        .get(pos..pos + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
        .ok_or_else(|| Error::Truncated(format!("{name}: missing header length")))?;
    pos += 4;
    let header: Header = serde_json::from_slice(
        bytes.get(pos..pos + len).ok_or_else(|| Error::Truncated(format!("{name}: header cut short")))?,
    )?;
    pos += len;
    let payload: usize = header.tensors.iter().map(|e| 4 * e.shape.iter().product::<usize>()).sum();
    let body_end = pos + payload;
    if bytes.len() < body_end + 32 {
        return Err(Error::Truncated(format!("{name}: {} bytes, expected {}", bytes.len(), body_end + 32)));
    }
    if bytes.len() > body_end + 32 {
        return Err(Error::Format(format!("{name}: trailing bytes after checksum")));
    }
    let computed = Sha256::digest(&bytes[..body_end]);
    if bytes[body_end..] != computed[..] {
        return Err(Error::Checksum {
            stored: crate::dataset::hex_digest(&bytes[body_end..]),
            computed: crate::dataset::hex_digest(&computed),
        });
    }
    let mut arrays = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        let data = bytes[pos..pos + 4 * n]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        pos += 4 * n;
        arrays.push(NamedArray { name: e.name, shape: e.shape, data });
    }
    Ok(CheckpointFile { architecture: header.architecture, arrays })
}
