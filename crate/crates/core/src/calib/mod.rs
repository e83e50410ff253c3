//! Backend calibration profiles, composite quality scores, good/bad pools and
//! client-to-backend assignment.

mod profile;

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub use profile::{load_profile, load_profile_dir, BackendProfile, CouplingMap, EdgeError, ProfileFile};

/// Guard added to every median denominator.
pub const MEDIAN_GUARD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("failed to read {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("profile parse error: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("{file}: {inner}")]
    InFile { file: String, inner: Box<CalibError> },
    #[error("no backend profiles")]
    Empty,
    #[error("pool_size {pool_size} too large for {available} backends (max {max})")]
    PoolTooLarge { pool_size: usize, available: usize, max: usize },
    #[error("{0} pool is empty")]
    EmptyPool(Group),
    #[error("invalid assignment request: {0}")]
    BadRequest(String),
}

impl CalibError {
    fn in_file(self, path: &Path) -> Self {
        CalibError::InFile { file: path.display().to_string(), inner: Box::new(self) }
    }
}

/// Per-component weights for composite scores and noise budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub lambda_1q: f64,
    pub lambda_2q: f64,
    pub lambda_ro: f64,
    pub lambda_t1: f64,
    pub lambda_t2: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        Self { lambda_1q: 1.0, lambda_2q: 5.0, lambda_ro: 2.0, lambda_t1: 1.0, lambda_t2: 1.0 }
    }
}

impl CompositeWeights {
    /// Weights in `(1q, 2q, ro, T1, T2)` order.
    pub fn from_array(v: [f64; 5]) -> Result<Self, CalibError> {
        if v.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(CalibError::Invalid("composite weights must be nonnegative".into()));
        }
        if v.iter().all(|w| *w == 0.0) {
            return Err(CalibError::Invalid("at least one composite weight must be positive".into()));
        }
        Ok(Self { lambda_1q: v[0], lambda_2q: v[1], lambda_ro: v[2], lambda_t1: v[3], lambda_t2: v[4] })
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.lambda_1q, self.lambda_2q, self.lambda_ro, self.lambda_t1, self.lambda_t2]
    }

    pub fn total(&self) -> f64 {
        self.to_array().iter().sum()
    }

    /// Weighted sum of components given in `(1q, 2q, ro, T1, T2)` order.
    pub fn combine(&self, components: [f64; 5]) -> f64 {
        self.lambda_2q * components[1]
            + self.lambda_1q * components[0]
            + self.lambda_ro * components[2]
            + self.lambda_t1 * components[3]
            + self.lambda_t2 * components[4]
    }
}

impl FromStr for CompositeWeights {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CalibError::Invalid(format!("bad weight list {s:?}: {e}")))?;
        let arr: [f64; 5] = parts
            .try_into()
            .map_err(|_| CalibError::Invalid(format!("expected 5 weights, got {s:?}")))?;
        Self::from_array(arr)
    }
}

/// Median of a non-empty slice; mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty set");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Divide each column entry by its column median (plus guard).
pub(crate) fn median_normalize(rows: &[[f64; 5]]) -> Vec<[f64; 5]> {
    let mut medians = [0.0; 5];
    for (s, m) in medians.iter_mut().enumerate() {
        let column: Vec<f64> = rows.iter().map(|r| r[s]).collect();
        *m = median(&column) + MEDIAN_GUARD;
    }
    rows.iter()
        .map(|r| std::array::from_fn(|s| r[s] / medians[s]))
        .collect()
}

/// Keep only profiles large enough to host a `qubits`-wide circuit.
pub fn filter_by_qubits(profiles: &[BackendProfile], qubits: usize) -> Vec<BackendProfile> {
    profiles.iter().filter(|p| p.num_qubits >= qubits).cloned().collect()
}

/// Composite backend score, lower is better. Output order follows input order.
pub fn composite_score(
    profiles: &[BackendProfile],
    weights: &CompositeWeights,
) -> Result<Vec<(String, f64)>, CalibError> {
    if profiles.is_empty() {
        return Err(CalibError::Empty);
    }
    let raw: Vec<[f64; 5]> = profiles
        .iter()
        .map(|p| {
            [
                p.mean_err_1q(),
                p.mean_err_2q(),
                p.mean_readout_error(),
                1.0 / p.mean_t1_us(),
                1.0 / p.mean_t2_us(),
            ]
        })
        .collect();
    Ok(profiles
        .iter()
        .zip(median_normalize(&raw))
        .map(|(p, norm)| (p.name.clone(), weights.combine(norm)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Good,
    Bad,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Good => "good",
            Group::Bad => "bad",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendRanking {
    /// `(name, score)` ascending by score, ties by name.
    pub scored: Vec<(String, f64)>,
    pub good_pool: Vec<String>,
    pub bad_pool: Vec<String>,
    pub best: String,
}

impl BackendRanking {
    pub fn pool_of(&self, name: &str) -> Option<Group> {
        if self.good_pool.iter().any(|n| n == name) {
            Some(Group::Good)
        } else if self.bad_pool.iter().any(|n| n == name) {
            Some(Group::Bad)
        } else {
            None
        }
    }
}

/// Default pool size for `n` candidate backends.
pub fn default_pool_size(n: usize) -> usize {
    5.min(n / 2)
}

pub fn rank_and_pool(
    scored: &[(String, f64)],
    pool_size: Option<usize>,
) -> Result<BackendRanking, CalibError> {
    if scored.is_empty() {
        return Err(CalibError::Empty);
    }
    let max = scored.len() / 2;
    let pool_size = pool_size.unwrap_or_else(|| default_pool_size(scored.len()));
    if pool_size == 0 || pool_size > max {
        return Err(CalibError::PoolTooLarge { pool_size, available: scored.len(), max });
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let names: Vec<String> = sorted.iter().map(|(n, _)| n.clone()).collect();
    Ok(BackendRanking {
        good_pool: names[..pool_size].to_vec(),
        bad_pool: names[names.len() - pool_size..].to_vec(),
        best: names[0].clone(),
        scored: sorted,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClientAssignment {
    pub client_id: usize,
    pub backend: String,
    pub group: Group,
}

/// `round(rho * k)` with halves rounded up.
pub fn bad_client_count(k: usize, rho: f64) -> usize {
    ((rho * k as f64) + 0.5).floor() as usize
}

/// Assign `k` clients to backends: `round(rho*k)` from the bad pool, the rest
/// from the good pool, each drawn uniformly with replacement, then shuffled.
pub fn assign_clients(
    ranking: &BackendRanking,
    k: usize,
    rho: f64,
    seed: u64,
) -> Result<Vec<ClientAssignment>, CalibError> {
    if k == 0 {
        return Err(CalibError::BadRequest("number of clients must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(CalibError::BadRequest("rho out of [0,1]".into()));
    }
    let n_bad = bad_client_count(k, rho).min(k);
    if n_bad > 0 && ranking.bad_pool.is_empty() {
        return Err(CalibError::EmptyPool(Group::Bad));
    }
    if n_bad < k && ranking.good_pool.is_empty() {
        return Err(CalibError::EmptyPool(Group::Good));
    }
    let mut rng = seed::rng(seed);
    let mut draws: Vec<(String, Group)> = Vec::with_capacity(k);
    for i in 0..k {
        let (pool, group) = if i < n_bad {
            (&ranking.bad_pool, Group::Bad)
        } else {
            (&ranking.good_pool, Group::Good)
        };
        let pick = rng.random_range(0..pool.len());
        draws.push((pool[pick].clone(), group));
    }
    draws.shuffle(&mut rng);
    Ok(draws
        .into_iter()
        .enumerate()
        .map(|(client_id, (backend, group))| ClientAssignment { client_id, backend, group })
        .collect())
}
