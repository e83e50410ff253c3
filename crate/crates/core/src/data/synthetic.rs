use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Split};
use crate::seed;

/// Three isotropic Gaussian clusters. Class `c` is centred on
/// `separation * e_c` (the first three axes), so `dim >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSpec {
    pub dim: usize,
    pub separation: f64,
    pub noise: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self { dim: 8, separation: 3.0, noise: 1.0 }
    }
}

fn draw(n: usize, spec: &BlobSpec, split: Split, rng: &mut seed::Rng) -> Result<Dataset, DataError> {
    let normal = Normal::new(0.0, spec.noise).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    labels.shuffle(rng);
    let mut features = Vec::with_capacity(n * spec.dim);
    for &y in &labels {
        for j in 0..spec.dim {
            let centre = if j == y { spec.separation } else { 0.0 };
            features.push(centre + normal.sample(rng));
        }
    }
    Dataset::new(features, spec.dim, labels, split)
}

/// Deterministic 3-class train/test pair with balanced labels.
pub fn gaussian_blobs(n_train: usize, n_test: usize, spec: BlobSpec, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if spec.dim < 3 {
        return Err(DataError::Invalid(format!("blob dimension must be at least 3, got {}", spec.dim)));
    }
    if !(spec.noise > 0.0) || !spec.separation.is_finite() {
        return Err(DataError::Invalid("blob noise must be positive and separation finite".into()));
    }
    let train = draw(n_train, &spec, Split::Train, &mut seed::rng_for(seed, &[0]))?;
    let test = draw(n_test, &spec, Split::Test, &mut seed::rng_for(seed, &[1]))?;
    Ok((train, test))
}
