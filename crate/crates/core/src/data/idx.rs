use std::fs;
use std::path::Path;

use super::{DataError, Dataset, Split};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, DataError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated)
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|e| DataError::Io(path.display().to_string(), e))
}

/// Parse in-memory IDX image and label files; pixels are scaled to [0,1].
pub fn parse_idx(images: &[u8], labels: &[u8], split: Split) -> Result<Dataset, DataError> {
    let magic = be_u32(images, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic { found: magic, expected: IMAGE_MAGIC });
    }
    let count = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    let pixels = rows * cols;
    let payload = &images[16..];
    if payload.len() < count * pixels {
        return Err(DataError::Truncated);
    }

    let magic = be_u32(labels, 0)?;
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic { found: magic, expected: LABEL_MAGIC });
    }
    let label_count = be_u32(labels, 4)? as usize;
    let label_payload = &labels[8..];
    if label_payload.len() < label_count {
        return Err(DataError::Truncated);
    }
    if label_count != count {
        return Err(DataError::CountMismatch { images: count, labels: label_count });
    }

    let features = payload[..count * pixels].iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = label_payload[..count].iter().map(|&l| usize::from(l)).collect();
    Dataset::new(features, pixels, labels, split)
}

/// Load an IDX image/label file pair (MNIST and Fashion-MNIST layout).
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, split: Split) -> Result<Dataset, DataError> {
    parse_idx(&read(images.as_ref())?, &read(labels.as_ref())?, split)
}

/// Encode images (`rows*cols` bytes each) and labels as IDX byte buffers.
pub fn write_idx(images: &[Vec<u8>], rows: usize, cols: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + images.len() * rows * cols);
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
