//! Server side of the federation: execution-risk budgets, aggregation weight
//! rules and the round loop.

mod run;
mod strategy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{median_normalize, BackendProfile, CalibError, CompositeWeights};
use crate::data::DataError;
use crate::exec::ExecError;
use crate::train::TrainError;
use crate::transpile::TranspiledStats;

pub use run::{prepare, run_federation, ClientSetup, FederationHistory, FederationPlan, FederationSettings, RoundRecord};
pub use strategy::{
    AggregationStrategy, Aggregate, FedAvg, Qrail, RoundContext, StrategyFactory, StrategyRegistry, WpqflEuclidean,
    WpqflWeighted,
};

/// Guard added wherever a denominator could vanish.
pub const EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FedError {
    #[error("no participating clients")]
    NoClients,
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown aggregation method '{0}' (known: {1})")]
    UnknownMethod(String, String),
    #[error("invalid setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("round {round}, client {client}: {source}")]
    Client {
        round: usize,
        client: usize,
        #[source]
        source: TrainError,
    },
    #[error("round {round}, global evaluation: {source}")]
    Eval {
        round: usize,
        #[source]
        source: ExecError,
    },
    #[error("backend {backend}: {source}")]
    Backend {
        backend: String,
        #[source]
        source: ExecError,
    },
}

/// Per-client execution-risk summary. Component arrays use the
/// `(1q, 2q, readout, T1, T2)` order of [`CompositeWeights::combine`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub raw: [f64; 5],
    pub normalized: [f64; 5],
    pub total: f64,
}

/// Raw risk components of one transpiled circuit on one backend.
pub fn raw_budget(stats: &TranspiledStats, profile: &BackendProfile) -> [f64; 5] {
    let d = stats.depth as f64;
    [
        stats.n_1q as f64 * profile.mean_err_1q(),
        stats.n_2q as f64 * profile.mean_err_2q(),
        stats.n_meas as f64 * profile.mean_readout_error(),
        d / (profile.mean_t1_us() + EPS),
        d / (profile.mean_t2_us() + EPS),
    ]
}

/// Budgets for every client, median-normalized across the given set.
pub fn noise_budgets(
    stats: &[TranspiledStats],
    profiles: &[&BackendProfile],
    lambda: &CompositeWeights,
) -> Result<Vec<NoiseBudget>, FedError> {
    if stats.is_empty() {
        return Err(FedError::NoClients);
    }
    if profiles.len() != stats.len() {
        return Err(FedError::Dimension { expected: stats.len(), got: profiles.len() });
    }
    let raw: Vec<[f64; 5]> = stats.iter().zip(profiles).map(|(s, p)| raw_budget(s, p)).collect();
    Ok(raw
        .iter()
        .zip(median_normalize(&raw))
        .map(|(&raw, normalized)| NoiseBudget { raw, normalized, total: lambda.combine(normalized) })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QrailParams {
    pub tau: f64,
    pub beta: f64,
    pub w_min: f64,
}

impl Default for QrailParams {
    fn default() -> Self {
        Self { tau: 5.0, beta: 0.2, w_min: 0.05 }
    }
}

impl QrailParams {
    /// Sharper settings for heavily skewed client mixes.
    pub const STRESS: QrailParams = QrailParams { tau: 10.0, beta: 0.05, w_min: 0.01 };

    pub fn validate(&self, k: usize) -> Result<(), FedError> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(FedError::Invalid(format!("tau must be non-negative, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(FedError::Invalid(format!("beta out of [0,1]: {}", self.beta)));
        }
        if k > 0 && !(0.0..=1.0 / k as f64).contains(&self.w_min) {
            return Err(FedError::Invalid(format!("w_min out of [0, 1/K] for K={k}: {}", self.w_min)));
        }
        Ok(())
    }
}

/// Every stage of the weight computation, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationWeights {
    pub e_hat: Vec<f64>,
    pub softmax: Vec<f64>,
    pub mixed: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn fedavg_weights(k: usize) -> AggregationWeights {
    let u = vec![1.0 / k as f64; k];
    AggregationWeights { e_hat: vec![0.0; k], softmax: u.clone(), mixed: u.clone(), w: u }
}

/// Reliability weights from per-client budgets: min-max normalize, softmax at
/// temperature `tau`, mix with uniform by `beta`, floor at `w_min`, renormalize.
pub fn qrail_weights(e: &[f64], params: &QrailParams) -> AggregationWeights {
    let k = e.len();
    let (lo, hi) = e.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if k == 0 || hi == lo {
        // every stage is uniform; returning 1/K exactly keeps this path bit-identical to FedAvg
        return fedavg_weights(k);
    }
    let e_hat: Vec<f64> = e.iter().map(|v| (v - lo) / (hi - lo + EPS)).collect();
    // Ê >= 0, so exponents are <= 0 and need no max-shift
    let exps: Vec<f64> = e_hat.iter().map(|v| (-params.tau * v).exp()).collect();
    let z: f64 = exps.iter().sum();
    let softmax: Vec<f64> = exps.iter().map(|x| x / z).collect();
    let mixed: Vec<f64> = softmax.iter().map(|p| (1.0 - params.beta) * p + params.beta / k as f64).collect();
    let floored: Vec<f64> = mixed.iter().map(|m| m.max(params.w_min)).collect();
    let total: f64 = floored.iter().sum();
    let w = floored.iter().map(|f| f / total).collect();
    AggregationWeights { e_hat, softmax, mixed, w }
}

/// `theta + sum_k w_k * deltas_k`.
pub fn server_round(theta: &[f64], deltas: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>, FedError> {
    if deltas.len() != weights.len() {
        return Err(FedError::Dimension { expected: weights.len(), got: deltas.len() });
    }
    let mut out = theta.to_vec();
    for (d, &w) in deltas.iter().zip(weights) {
        if d.len() != theta.len() {
            return Err(FedError::Dimension { expected: theta.len(), got: d.len() });
        }
        for (o, x) in out.iter_mut().zip(d.iter()) {
            *o += w * x;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WpqflVariant {
    Euclidean,
    Weighted90g10l,
}

/// Share of the new global model in each client's personalized start.
pub const WPQFL_GLOBAL_SHARE: f64 = 0.9;

/// Personalized update: returns the new global model and each client's next
/// starting point.
pub fn wpqfl_update(
    theta_global: &[f64],
    locals: &[&[f64]],
    variant: WpqflVariant,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), FedError> {
    let k = locals.len();
    if k == 0 {
        return Err(FedError::NoClients);
    }
    if let Some(bad) = locals.iter().find(|l| l.len() != theta_global.len()) {
        return Err(FedError::Dimension { expected: theta_global.len(), got: bad.len() });
    }
    let average = |w: &[f64]| -> Vec<f64> {
        (0..theta_global.len()).map(|m| locals.iter().zip(w).map(|(l, wk)| wk * l[m]).sum()).collect()
    };
    match variant {
        WpqflVariant::Euclidean => {
            let global = average(&euclidean_weights(theta_global, locals));
            Ok((global.clone(), vec![global; k]))
        }
        WpqflVariant::Weighted90g10l => {
            let global = average(&vec![1.0 / k as f64; k]);
            let starts = locals
                .iter()
                .map(|l| {
                    global.iter().zip(l.iter()).map(|(g, x)| WPQFL_GLOBAL_SHARE * g + (1.0 - WPQFL_GLOBAL_SHARE) * x).collect()
                })
                .collect();
            Ok((global, starts))
        }
    }
}

/// Inverse-distance weights of the euclidean variant.
pub fn euclidean_weights(theta_global: &[f64], locals: &[&[f64]]) -> Vec<f64> {
    let inv: Vec<f64> = locals
        .iter()
        .map(|l| 1.0 / (l.iter().zip(theta_global).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() + EPS))
        .collect();
    let z: f64 = inv.iter().sum();
    inv.iter().map(|v| v / z).collect()
}
