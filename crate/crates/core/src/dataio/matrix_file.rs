//! Pre-vectorized matrices: a JSON manifest next to a headerless
//! little-endian `f32` blob.
//!
//! ```json
//! {"n": 10000, "dim": 2000, "dtype": "f32le", "labels": "reuters.labels.idx"}
//! ```
//!
//! The blob defaults to the manifest path with extension `bin`; a `data` key
//! overrides it. Relative paths resolve against the manifest's directory.
//! Labels, when given, are an IDX label file.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::bundle::DatasetBundle;
use super::error::DataError;
use super::idx;
use crate::scalar::{lit, to_f64, Real};

pub const DTYPE_F32LE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixManifest {
    pub n: usize,
    pub dim: usize,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
}

fn resolve(manifest_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn load_matrix<T: Real>(manifest_path: &Path) -> Result<DatasetBundle<T>, DataError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| DataError::io(manifest_path, e))?;
    let manifest: MatrixManifest =
        serde_json::from_str(&text).map_err(|source| DataError::Manifest {
            path: manifest_path.into(),
            source,
        })?;
    if manifest.dtype != DTYPE_F32LE {
        return Err(DataError::InvalidArgument(format!(
            "unsupported dtype `{}`",
            manifest.dtype
        )));
    }
    let blob_path = match &manifest.data {
        Some(p) => resolve(manifest_path, p),
        None => manifest_path.with_extension("bin"),
    };
    let bytes = fs::read(&blob_path).map_err(|e| DataError::io(&blob_path, e))?;
    let expected = manifest.n * manifest.dim * 4;
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            path: blob_path,
            expected,
            actual: bytes.len(),
        });
    }
    let values = bytes[..expected]
        .chunks_exact(4)
        .map(|c| lit::<T>(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect();
    let x = Array2::from_shape_vec((manifest.n, manifest.dim), values).expect("size checked");
    let labels = match &manifest.labels {
        Some(p) => {
            let l = idx::read_labels(&resolve(manifest_path, p))?;
            if l.len() != manifest.n {
                return Err(DataError::CountMismatch {
                    images: manifest.n,
                    labels: l.len(),
                });
            }
            Some(l.into_iter().map(usize::from).collect())
        }
        None => None,
    };
    let name = manifest_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    DatasetBundle::new(name, x, labels)
}

/// Writes `<stem>.json`, `<stem>.bin` and, with labels, `<stem>.labels.idx`.
pub fn write_matrix<T: Real>(
    bundle: &DatasetBundle<T>,
    manifest_path: &Path,
) -> Result<MatrixManifest, DataError> {
    let blob_path = manifest_path.with_extension("bin");
    let mut blob = Vec::with_capacity(bundle.x.len() * 4);
    for &v in bundle.x.iter() {
        blob.extend_from_slice(&(to_f64(v) as f32).to_le_bytes());
    }
    fs::write(&blob_path, blob).map_err(|e| DataError::io(&blob_path, e))?;
    let labels = match &bundle.labels {
        Some(l) => {
            let path = manifest_path.with_extension("labels.idx");
            fs::write(&path, idx::encode_labels(l)?).map_err(|e| DataError::io(&path, e))?;
            Some(PathBuf::from(path.file_name().expect("file name")))
        }
        None => None,
    };
    let manifest = MatrixManifest {
        n: bundle.n(),
        dim: bundle.dim(),
        dtype: DTYPE_F32LE.into(),
        labels,
        data: None,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(manifest_path, text).map_err(|e| DataError::io(manifest_path, e))?;
    Ok(manifest)
}
