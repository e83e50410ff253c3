//! Dataset ingestion, PCA reduction to the qubit count, angle scaling and
//! client partitioning.

mod container;
mod idx;
mod partition;
mod pca;
mod synthetic;

use std::collections::BTreeSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub use container::{load_container, write_container};
pub use idx::{load_idx, parse_idx, write_idx};
pub use partition::{partition, Partition, PartitionMode};
pub use pca::{pca_fit_transform, PcaModel};
pub use synthetic::{gaussian_blobs, BlobSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("payload shorter than header count")]
    Truncated,
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("bad container header: {0}")]
    Header(String),
    #[error("duplicate class {0} in selection")]
    DuplicateClass(usize),
    #[error("class {0} not present in dataset")]
    MissingClass(usize),
    #[error("rank {achievable} is below the requested {requested} components")]
    RankDeficient { achievable: usize, requested: usize },
    #[error("invalid request: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Row-major feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub cols: usize,
    pub labels: Vec<usize>,
    pub split: Split,
}

impl Dataset {
    pub fn new(features: Vec<f64>, cols: usize, labels: Vec<usize>, split: Split) -> Result<Self, DataError> {
        if cols == 0 || features.len() != cols * labels.len() {
            return Err(DataError::Invalid(format!(
                "{} feature values do not form {} rows of {cols}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self { features, cols, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.cols)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            cols: self.cols,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        }
    }

    pub fn label_histogram(&self, num_classes: usize) -> Vec<usize> {
        let mut h = vec![0; num_classes];
        for &l in &self.labels {
            if l < num_classes {
                h[l] += 1;
            }
        }
        h
    }
}

/// Keep rows of three original labels and relabel them 0, 1, 2 in the given order.
pub fn restrict_classes(ds: &Dataset, classes: &[usize; 3]) -> Result<Dataset, DataError> {
    let mut seen = BTreeSet::new();
    for &c in classes {
        if !seen.insert(c) {
            return Err(DataError::DuplicateClass(c));
        }
        if !ds.labels.contains(&c) {
            return Err(DataError::MissingClass(c));
        }
    }
    let keep: Vec<usize> = (0..ds.len()).filter(|&i| classes.contains(&ds.labels[i])).collect();
    let mut out = ds.select(&keep);
    for l in &mut out.labels {
        *l = classes.iter().position(|c| c == l).expect("filtered to selected classes");
    }
    Ok(out)
}

/// Seeded random subset of `n` rows, kept in original order. Returns the
/// dataset unchanged when it already has at most `n` rows.
pub fn subsample(ds: &Dataset, n: usize, seed: u64) -> Dataset {
    if n >= ds.len() {
        return ds.clone();
    }
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, ds.len(), n).into_vec();
    picked.sort_unstable();
    ds.select(&picked)
}
