//! Checkpoint directories: `manifest.json` plus `weights.bin`.
//!
//! `weights.bin` is the concatenation of every tensor as little-endian f32.
//! Each manifest entry records the tensor name, its shape, and the byte
//! `offset` and byte `len` of its blob inside `weights.bin`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            shape,
            values,
        }
    }
}

pub fn write_checkpoint(dir: &Path, tensors: &[NamedTensor]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(tensors.len());
    let mut blob = Vec::new();
    for t in tensors {
        let count: usize = t.shape.iter().product();
        if count != t.values.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {} has shape {:?} but {} values",
                t.name,
                t.shape,
                t.values.len()
            )));
        }
        let offset = blob.len() as u64;
        for v in &t.values {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        manifest.push(ManifestEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset,
            len: blob.len() as u64 - offset,
        });
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    let weights_path = dir.join(WEIGHTS_FILE);
    fs::write(&weights_path, &blob).map_err(|e| Error::io(&weights_path, e))
}

pub fn read_checkpoint(dir: &Path) -> Result<Vec<NamedTensor>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: manifest_path.clone(),
            line: 0,
            source,
        })?;
    let weights_path = dir.join(WEIGHTS_FILE);
    let blob = fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
    manifest
        .into_iter()
        .map(|entry| {
            let count: u64 = entry.shape.iter().map(|&s| s as u64).product();
            if entry.len != 4 * count {
                return Err(Error::Checkpoint(format!(
                    "{}: len {} does not match shape {:?}",
                    entry.name, entry.len, entry.shape
                )));
            }
            let end = entry.offset.checked_add(entry.len).filter(|&e| e <= blob.len() as u64);
            let Some(end) = end else {
                return Err(Error::Checkpoint(format!(
                    "{}: blob [{}, +{}) exceeds weights.bin ({} bytes)",
                    entry.name,
                    entry.offset,
                    entry.len,
                    blob.len()
                )));
            };
            let values = blob[entry.offset as usize..end as usize]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(NamedTensor::new(entry.name, entry.shape, values))
        })
        .collect()
}
