//! Checkpoint layout: `checkpoint.json` describes every parameter (name,
//! shape, offset) and `checkpoint.bin` holds their values as little-endian
//! f64 in that order.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{Architecture, LpvdnModel};
use crate::scalar::{lit, to_f64, Real};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Offset into the blob, in f64 values.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub version: u32,
    pub architecture: Architecture,
    pub config: TrainConfig,
    pub config_hash: String,
    pub ablation: Vec<String>,
    pub epochs_completed: usize,
    pub dtype: String,
    /// Blob file name, relative to the manifest.
    pub blob: PathBuf,
    pub params: Vec<ParamEntry>,
}

/// Writes `checkpoint.json` and `checkpoint.bin` into `dir` and returns the
/// manifest path.
pub fn save_checkpoint<T: Real>(
    model: &LpvdnModel<T>,
    config: &TrainConfig,
    dir: &Path,
    epochs_completed: usize,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::with_capacity(model.store.num_scalars() * 8);
    let mut params = Vec::with_capacity(model.store.len());
    let mut offset = 0;
    for p in model.store.iter() {
        let (r, c) = p.shape();
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: [r, c],
            offset,
        });
        offset += r * c;
        for &v in p.value.iter() {
            blob.extend_from_slice(&to_f64(v).to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        architecture: model.arch.clone(),
        config: config.clone(),
        config_hash: config.hash(),
        ablation: config.ablation_names(),
        epochs_completed,
        dtype: "f64le".into(),
        blob: PathBuf::from("checkpoint.bin"),
        params,
    };
    let bin = dir.join("checkpoint.bin");
    fs::write(&bin, &blob).map_err(|e| Error::io(&bin, e))?;
    let json = dir.join("checkpoint.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    Ok(json)
}

/// Accepts either the manifest path or the directory containing it.
pub fn load_checkpoint<T: Real>(path: &Path) -> Result<(LpvdnModel<T>, CheckpointManifest)> {
    let json = if path.is_dir() {
        path.join("checkpoint.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: json.clone(),
            source,
        })?;
    if manifest.version != CHECKPOINT_VERSION || manifest.dtype != "f64le" {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} / dtype {}",
            manifest.version, manifest.dtype
        )));
    }
    let bin = json.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let mut model = LpvdnModel::<T>::new(manifest.architecture.clone(), 0);
    if model.store.len() != manifest.params.len() {
        return Err(Error::Checkpoint(format!(
            "manifest lists {} parameters, architecture has {}",
            manifest.params.len(),
            model.store.len()
        )));
    }
    let ids: Vec<_> = model.store.ids().collect();
    for (id, entry) in ids.into_iter().zip(&manifest.params) {
        let p = model.store.get_mut(id);
        let (r, c) = p.shape();
        if p.name != entry.name || [r, c] != entry.shape {
            return Err(Error::Checkpoint(format!(
                "parameter `{}` {:?} does not match architecture `{}` {:?}",
                entry.name,
                entry.shape,
                p.name,
                [r, c]
            )));
        }
        let start = entry.offset * 8;
        let end = start + r * c * 8;
        let raw = bytes.get(start..end).ok_or_else(|| {
            Error::Checkpoint(format!("blob too short for parameter `{}`", entry.name))
        })?;
        let values: Vec<T> = raw
            .chunks_exact(8)
            .map(|b| lit(f64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect();
        p.value = Array2::from_shape_vec((r, c), values).expect("shape checked");
    }
    Ok((model, manifest))
}
