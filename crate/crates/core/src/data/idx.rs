//! IDX files (the MNIST container): big-endian magic, big-endian `u32`
//! dimensions, then unsigned bytes.

use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(offset as u64, format!("truncated {what}")))
}

/// Returns `(count, rows, cols, pixels)` with pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            0,
            format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format(4, "image dimensions overflow"))?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated pixel data: {} of {need} bytes", body.len()),
        ));
    }
    if body.len() > need {
        return Err(Error::format(
            (16 + need) as u64,
            "trailing bytes after pixels",
        ));
    }
    Ok((
        count,
        rows,
        cols,
        body.iter().map(|&b| b as f64 / 255.0).collect(),
    ))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            0,
            format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated labels: {} of {count} bytes", body.len()),
        ));
    }
    if body.len() > count {
        return Err(Error::format(
            (8 + count) as u64,
            "trailing bytes after labels",
        ));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

/// Loads an image/label IDX pair. The class count is `max label + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    from_idx_bytes(&images, &labels)
}

pub(crate) fn from_idx_bytes(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let (count, rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if count == 0 {
        return Err(Error::EmptyDataset(
            "IDX image file holds zero images".into(),
        ));
    }
    if labels.len() != count {
        return Err(Error::format(
            4,
            format!("{count} images but {} labels", labels.len()),
        ));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(
        Matrix::from_vec(count, rows * cols, pixels)?,
        labels,
        classes,
    )
}
