//! Checkpoint files.
//!
//! `checkpoint.manifest` is JSON listing every tensor (name, shape, byte
//! offset, element count) plus the network spec, format version, and
//! endianness. `checkpoint.bin` holds the raw little-endian `f64` values in
//! manifest order with no padding.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::TargetNetwork;
use super::params::ParamSet;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_BIN: &str = "checkpoint.bin";
pub const CHECKPOINT_MANIFEST: &str = "checkpoint.manifest";
pub const FORMAT_NAME: &str = "sskt-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into `checkpoint.bin`.
    pub offset: u64,
    /// Number of `f64` elements.
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub endianness: String,
    pub dtype: String,
    pub network: NetworkSpec,
    pub tensors: Vec<TensorEntry>,
    pub total_bytes: u64,
    /// Hex SHA-256 of `checkpoint.bin`.
    pub sha256: String,
}

impl Manifest {
    pub fn for_network(net: &TargetNetwork) -> Self {
        let mut offset = 0u64;
        let tensors = net
            .params()
            .iter()
            .map(|(name, t)| {
                let e = TensorEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    offset,
                    len: t.numel() as u64,
                };
                offset += 8 * t.numel() as u64;
                e
            })
            .collect();
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            endianness: "little".into(),
            dtype: "f64".into(),
            network: net.spec().clone(),
            tensors,
            total_bytes: offset,
            sha256: net.params().checksum(),
        }
    }

    fn check_header(&self) -> Result<()> {
        if self.format != FORMAT_NAME {
            return Err(Error::Checkpoint(format!(
                "unknown format `{}`",
                self.format
            )));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.endianness != "little" || self.dtype != "f64" {
            return Err(Error::Checkpoint(format!(
                "unsupported layout {}/{}",
                self.endianness, self.dtype
            )));
        }
        Ok(())
    }

    /// Rebuilds the network from raw `checkpoint.bin` bytes.
    pub fn decode(&self, bytes: &[u8]) -> Result<TargetNetwork> {
        self.check_header()?;
        if bytes.len() as u64 != self.total_bytes {
            return Err(Error::Checkpoint(format!(
                "expected {} bytes, found {}",
                self.total_bytes,
                bytes.len()
            )));
        }
        let digest = hex::encode(Sha256::digest(bytes));
        if digest != self.sha256 {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut params = ParamSet::new();
        for e in &self.tensors {
            let start = e.offset as usize;
            let end = start + 8 * e.len as usize;
            let chunk = bytes
                .get(start..end)
                .ok_or_else(|| Error::Checkpoint(format!("`{}` lies outside the data", e.name)))?;
            let data = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(e.shape.clone(), data)
                .map_err(|err| Error::Checkpoint(format!("`{}`: {err}", e.name)))?;
            params.push(e.name.clone(), t);
        }
        TargetNetwork::from_parts(self.network.clone(), params)
    }
}

/// Writes `checkpoint.bin` and `checkpoint.manifest` into `dir`.
pub fn save_checkpoint(net: &TargetNetwork, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest::for_network(net);
    let bin = dir.join(CHECKPOINT_BIN);
    fs::write(&bin, net.params().to_le_bytes()).map_err(|e| Error::io(&bin, e))?;
    let path = dir.join(CHECKPOINT_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(CHECKPOINT_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_checkpoint(dir: &Path) -> Result<TargetNetwork> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(CHECKPOINT_BIN);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    manifest.decode(&bytes)
}
