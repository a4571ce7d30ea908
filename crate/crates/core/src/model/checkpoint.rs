//! Single-file parameter checkpoints and the pretrained-weights manifest.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{component_of, ParamStore};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "1";
const VERSION_KEY: &str = "format_version";

/// Write every parameter plus string metadata to a safetensors file.
pub fn save_checkpoint(path: impl AsRef<Path>, params: &ParamStore, metadata: &BTreeMap<String, String>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut info: HashMap<String, String> = metadata.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    info.insert(VERSION_KEY.into(), CHECKPOINT_VERSION.into());
    let tensors: Vec<(String, Tensor)> = params
        .iter()
        .map(|(n, v)| Ok((n.to_string(), v.as_tensor().contiguous()?)))
        .collect::<Result<_>>()?;
    safetensors::serialize_to_file(tensors, Some(info), path)?;
    Ok(())
}

/// Tensors and metadata of a checkpoint file.
pub fn read_checkpoint(path: impl AsRef<Path>, device: &Device) -> Result<(BTreeMap<String, Tensor>, BTreeMap<String, String>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let (_, meta) = safetensors::SafeTensors::read_metadata(&bytes)?;
    let metadata: BTreeMap<String, String> = meta
        .metadata()
        .as_ref()
        .map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
        .unwrap_or_default();
    match metadata.get(VERSION_KEY).map(String::as_str) {
        Some(CHECKPOINT_VERSION) => {}
        Some(other) => {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported format version {other}",
                path.display()
            )))
        }
        None => return Err(Error::Checkpoint(format!("{}: no format version", path.display()))),
    }
    let tensors = candle_core::safetensors::load_buffer(&bytes, device)?.into_iter().collect();
    Ok((tensors, metadata))
}

/// Load a checkpoint into `params`; every parameter must be present.
pub fn load_checkpoint(path: impl AsRef<Path>, params: &ParamStore) -> Result<BTreeMap<String, String>> {
    let (tensors, metadata) = read_checkpoint(&path, params.device())?;
    for name in params.names() {
        let t = tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("{}: missing tensor `{name}`", path.as_ref().display())))?;
        params.assign(name, t)?;
    }
    Ok(metadata)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEntry {
    /// Safetensors file, relative to the manifest.
    pub file: PathBuf,
    /// Architecture widths the weights were exported with.
    #[serde(default)]
    pub dims: BTreeMap<String, usize>,
    /// Hex SHA-256 of the file, checked when present.
    #[serde(default)]
    pub hash: Option<String>,
}

/// `{"components": {"<component>": {"file", "dims", "hash"}}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub components: BTreeMap<String, ComponentEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl CheckpointManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    /// Copy the tensors of manifest entry `entry` into `params`. Tensor names
    /// in the file carry their component prefix; every parameter whose
    /// component is in `targets` must be supplied.
    pub fn load_into(&self, entry: &str, targets: &[&str], params: &ParamStore) -> Result<()> {
        let e = self
            .components
            .get(entry)
            .ok_or_else(|| Error::MissingCheckpoint(entry.to_string()))?;
        let file = self.root.join(&e.file);
        if !file.is_file() {
            return Err(Error::MissingCheckpoint(entry.to_string()));
        }
        let bytes = std::fs::read(&file)?;
        if let Some(expected) = &e.hash {
            let got = sha256_hex(&bytes);
            if !got.eq_ignore_ascii_case(expected) {
                return Err(Error::Checkpoint(format!("{entry}: hash mismatch ({got} != {expected})")));
            }
        }
        let tensors: BTreeMap<String, Tensor> =
            candle_core::safetensors::load_buffer(&bytes, params.device())?.into_iter().collect();
        for name in params.names().filter(|n| targets.contains(&component_of(n))) {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("{entry}: missing tensor `{name}`")))?;
            params.assign(name, t)?;
        }
        Ok(())
    }
}
