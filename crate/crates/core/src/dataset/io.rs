//! Dataset file: `SPKL1\n`, manifest length (u32 LE), JSON manifest,
//! little-endian `f32` sample records, then a SHA-256 of everything before it.
//!
//! Each record is `run_id: u32`, `target: f32`, `K` one-hot `f32`s and the
//! `3 x H x W` input `f32`s.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::triplets::{LabeledSample, NetInput, FRAMES_PER_INPUT};
use crate::ablation::ProcessParams;
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 6] = b"SPKL1\n";
pub const SCHEMA_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Groove,
    Drill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u32,
    pub params: ProcessParams,
    pub material: String,
    /// Label of every rendered frame, in acquisition order.
    pub frame_labels: Vec<f64>,
    /// Acquisition index of the first rendered frame.
    pub first_frame: usize,
    pub first_sample: usize,
    pub sample_count: usize,
    /// Byte offset of the run's first record, relative to the payload start.
    pub payload_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub mode: Mode,
    pub materials: Vec<String>,
    pub sample_count: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    /// Targets are divided by this before training.
    pub target_scale: f64,
    pub target_unit: String,
    pub seeds: BTreeMap<String, u64>,
    pub runs: Vec<RunRecord>,
}

impl DatasetManifest {
    pub fn record_len(&self) -> usize {
        4 * (2 + self.materials.len() + FRAMES_PER_INPUT * self.frame_height * self.frame_width)
    }

    fn check_samples(&self, samples: &[LabeledSample]) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Version(format!("manifest schema {}", self.schema_version)));
        }
        if self.sample_count != samples.len() {
            return Err(Error::Config(format!(
                "manifest declares {} samples, got {}",
                self.sample_count,
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.input.height() != self.frame_height || s.input.width() != self.frame_width {
                return Err(Error::Shape(format!(
                    "sample {i} is {}x{}, manifest says {}x{}",
                    s.input.height(),
                    s.input.width(),
                    self.frame_height,
                    self.frame_width
                )));
            }
            if s.material_onehot.len() != self.materials.len() {
                return Err(Error::Shape(format!(
                    "sample {i} has {} classes, manifest has {}",
                    s.material_onehot.len(),
                    self.materials.len()
                )));
            }
        }
        Ok(())
    }
}

/// Writes the dataset and returns the SHA-256 stored in its trailer.
pub fn write_dataset(
    samples: &[LabeledSample],
    manifest: &DatasetManifest,
    path: impl AsRef<Path>,
) -> Result<[u8; DIGEST_LEN]> {
    manifest.check_samples(samples)?;
    let manifest_text = serde_json::to_vec(manifest)?;
    let manifest_len = u32::try_from(manifest_text.len())
        .map_err(|_| Error::Config("manifest larger than 4 GiB".into()))?;

    let mut bytes = Vec::with_capacity(
        DATASET_MAGIC.len() + 4 + manifest_text.len() + samples.len() * manifest.record_len() + DIGEST_LEN,
    );
    bytes.extend_from_slice(DATASET_MAGIC);
    bytes.extend_from_slice(&manifest_len.to_le_bytes());
    bytes.extend_from_slice(&manifest_text);
    for s in samples {
        bytes.extend_from_slice(&s.run_id.to_le_bytes());
        bytes.extend_from_slice(&s.target_value.to_le_bytes());
        for v in s.material_onehot.iter().chain(s.input.data()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest: [u8; DIGEST_LEN] = Sha256::digest(&bytes).into();
    bytes.extend_from_slice(&digest);
    fs::write(path, bytes)?;
    Ok(digest)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<(Vec<LabeledSample>, DatasetManifest)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let name = path.display();

    if bytes.len() < DATASET_MAGIC.len() {
        return Err(Error::Truncated(format!("{name}: shorter than the magic header")));
    }
    let magic = &bytes[..DATASET_MAGIC.len()];
    if magic != DATASET_MAGIC {
        if magic.starts_with(b"SPKL") && magic[5] == b'\n' && magic[4].is_ascii_digit() {
            return Err(Error::Version(format!("{name}: dataset format {}", magic[4] as char)));
        }
        return Err(Error::Format(format!("{name}: missing SPKL1 magic")));
    }
    let mut pos = DATASET_MAGIC.len();
    let len_bytes = bytes
        .get(pos..pos + 4)
        .ok_or_else(|| Error::Truncated(format!("{name}: missing manifest length")))?;
    let manifest_len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
    pos += 4;
    let manifest_text = bytes
        .get(pos..pos + manifest_len)
        .ok_or_else(|| Error::Truncated(format!("{name}: manifest cut short")))?;
    let manifest: DatasetManifest = serde_json::from_slice(manifest_text)?;
    pos += manifest_len;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Version(format!(
            "{name}: manifest schema {} (expected {SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }

    let record_len = manifest.record_len();
    let payload_len = manifest.sample_count * record_len;
    let expected_total = pos + payload_len + DIGEST_LEN;
    if bytes.len() < expected_total {
        return Err(Error::Truncated(format!(
            "{name}: {} bytes, expected {expected_total}",
            bytes.len()
        )));
    }
    if bytes.len() > expected_total {
        return Err(Error::Format(format!(
            "{name}: {} trailing bytes after checksum",
            bytes.len() - expected_total
        )));
    }
    let body_end = pos + payload_len;
    let computed: [u8; DIGEST_LEN] = Sha256::digest(&bytes[..body_end]).into();
    let stored = &bytes[body_end..];
    if stored != computed {
        return Err(Error::Checksum { stored: hex_digest(stored), computed: hex_digest(&computed) });
    }

    let k = manifest.materials.len();
    let n_in = FRAMES_PER_INPUT * manifest.frame_height * manifest.frame_width;
    let mut samples = Vec::with_capacity(manifest.sample_count);
    for record in bytes[pos..body_end].chunks_exact(record_len) {
        let word = |i: usize| -> [u8; 4] { record[4 * i..4 * i + 4].try_into().expect("4 bytes") };
        let floats = |from: usize, n: usize| -> Vec<f32> {
            (from..from + n).map(|i| f32::from_le_bytes(word(i))).collect()
        };
        samples.push(LabeledSample {
            run_id: u32::from_le_bytes(word(0)),
            target_value: f32::from_le_bytes(word(1)),
            material_onehot: floats(2, k),
            input: NetInput::from_raw(manifest.frame_height, manifest.frame_width, floats(2 + k, n_in))?,
        });
    }
    Ok((samples, manifest))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
