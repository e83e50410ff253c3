//! Generic array container: one JSON header line `{"rows","cols","label_count"}`
//! terminated by `\n`, then `rows*cols` little-endian `f32` features, then
//! `label_count` unsigned 8-bit labels.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Split};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    rows: usize,
    cols: usize,
    label_count: usize,
}

pub fn parse_container(bytes: &[u8], split: Split) -> Result<Dataset, DataError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| DataError::Header("missing header line".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[..newline]).map_err(|e| DataError::Header(e.to_string()))?;
    if header.label_count != header.rows {
        return Err(DataError::CountMismatch { images: header.rows, labels: header.label_count });
    }
    let body = &bytes[newline + 1..];
    let n_feat = header.rows * header.cols;
    if body.len() < n_feat * 4 + header.label_count {
        return Err(DataError::Truncated);
    }
    let features = body[..n_feat * 4]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let labels = body[n_feat * 4..n_feat * 4 + header.label_count].iter().map(|&l| usize::from(l)).collect();
    Dataset::new(features, header.cols, labels, split)
}

pub fn load_container(path: impl AsRef<Path>, split: Split) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DataError::Io(path.display().to_string(), e))?;
    parse_container(&bytes, split)
}

pub fn write_container(ds: &Dataset) -> Result<Vec<u8>, DataError> {
    let header = Header { rows: ds.len(), cols: ds.cols, label_count: ds.len() };
    let mut out = serde_json::to_vec(&header).map_err(|e| DataError::Header(e.to_string()))?;
    out.push(b'\n');
    for &v in &ds.features {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for &l in &ds.labels {
        let byte = u8::try_from(l).map_err(|_| DataError::Invalid(format!("label {l} does not fit in u8")))?;
        out.push(byte);
    }
    Ok(out)
}
