//! IDX files as used by MNIST and Fashion-MNIST.
//!
//! Big-endian header: a 4-byte magic (`0x00000803` for rank-3 unsigned-byte
//! images, `0x00000801` for rank-1 label vectors), then one `u32` per
//! dimension, then the raw bytes.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::bundle::DatasetBundle;
use super::error::DataError;
use crate::scalar::{lit, to_f64, Real};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded image tensor: `n` images of `rows x cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

fn header(path: &Path, bytes: &[u8], magic: u32, rank: usize) -> Result<Vec<usize>, DataError> {
    let header_len = 4 + 4 * rank;
    if bytes.len() < 4 {
        return Err(DataError::Truncated {
            path: path.into(),
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let found = read_u32(bytes, 0);
    if found != magic {
        return Err(DataError::BadMagic {
            path: path.into(),
            expected: magic,
            found,
        });
    }
    if bytes.len() < header_len {
        return Err(DataError::Truncated {
            path: path.into(),
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let dims: Vec<usize> = (0..rank)
        .map(|i| read_u32(bytes, 4 + 4 * i) as usize)
        .collect();
    let expected = header_len + dims.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            path: path.into(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok(dims)
}

pub fn parse_images(path: &Path, bytes: &[u8]) -> Result<IdxImages, DataError> {
    let dims = header(path, bytes, IMAGES_MAGIC, 3)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    Ok(IdxImages {
        n,
        rows,
        cols,
        pixels: bytes[16..16 + n * rows * cols].to_vec(),
    })
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let dims = header(path, bytes, LABELS_MAGIC, 1)?;
    Ok(bytes[8..8 + dims[0]].to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    parse_images(path, &bytes)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    parse_labels(path, &bytes)
}

/// Loads an image file (and optionally its labels), scaling pixels by 1/255
/// and flattening each image row-major.
pub fn load_idx<T: Real>(
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<DatasetBundle<T>, DataError> {
    let images = read_images(images_path)?;
    let labels = labels_path.map(read_labels).transpose()?;
    if let Some(l) = &labels {
        if l.len() != images.n {
            return Err(DataError::CountMismatch {
                images: images.n,
                labels: l.len(),
            });
        }
    }
    let dim = images.rows * images.cols;
    let x = Array2::from_shape_vec(
        (images.n, dim),
        images
            .pixels
            .iter()
            .map(|&p| lit::<T>(p as f64 / 255.0))
            .collect(),
    )
    .expect("pixel count matches header");
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    DatasetBundle::new(
        name,
        x,
        labels.map(|l| l.into_iter().map(usize::from).collect()),
    )
}

/// Encodes `x` as IDX images of shape `rows x cols`, quantizing to bytes.
pub fn encode_images<T: Real>(
    x: &Array2<T>,
    rows: usize,
    cols: usize,
) -> Result<Vec<u8>, DataError> {
    if rows * cols != x.ncols() {
        return Err(DataError::InvalidArgument(format!(
            "{rows}x{cols} images do not cover {} features",
            x.ncols()
        )));
    }
    let mut out = Vec::with_capacity(16 + x.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [x.nrows(), rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend(
        x.iter()
            .map(|&v| (to_f64(v) * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    Ok(out)
}

pub fn encode_labels(labels: &[usize]) -> Result<Vec<u8>, DataError> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        let b = u8::try_from(l)
            .map_err(|_| DataError::InvalidArgument(format!("label {l} does not fit in a byte")))?;
        out.push(b);
    }
    Ok(out)
}

pub fn write_idx<T: Real>(
    bundle: &DatasetBundle<T>,
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<(), DataError> {
    let bytes = encode_images(&bundle.x, rows, cols)?;
    fs::write(images_path, bytes).map_err(|e| DataError::io(images_path, e))?;
    if let (Some(path), Some(labels)) = (labels_path, &bundle.labels) {
        fs::write(path, encode_labels(labels)?).map_err(|e| DataError::io(path, e))?;
    }
    Ok(())
}
