//! Config-driven experiment runner: multi-seed execution, CSV streams and
//! cross-seed reports.

pub mod config;
mod dataset;
pub mod persist;
pub mod report;
pub mod sweep;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::calib::{composite_score, filter_by_qubits, load_profile_dir, rank_and_pool, CalibError, CompositeWeights};
use crate::data::DataError;
use crate::fed::{prepare, qrail_weights, run_federation, FedError, FederationHistory, StrategyRegistry};

pub use config::FederationConfig;
pub use dataset::prepare_data;
pub use report::{aggregate_seeds, collect_runs, render_summary, Report};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Report(String),
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Calib(#[from] CalibError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    /// Process exit status: 1 for configuration problems, 2 for failures
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Files written by [`run_config`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub csv_files: Vec<PathBuf>,
    pub report: Report,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Run one method on one seed and return its history.
pub fn run_single(
    cfg: &FederationConfig,
    method: &str,
    seed: u64,
    profiles: &[crate::calib::BackendProfile],
    data: &(crate::data::Dataset, crate::data::Dataset),
) -> Result<FederationHistory, HarnessError> {
    let settings = cfg.settings(method)?;
    let plan = prepare(&settings, profiles, data.0.clone(), data.1.clone(), seed)?;
    Ok(run_federation(&plan, &StrategyRegistry::default())?)
}

/// Execute every (method, seed) pair of `cfg`, write one CSV per pair and an
/// `aggregate.json` report into the output directory.
pub fn run_config(cfg: &FederationConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let profiles = load_profile_dir(cfg.resolve(&cfg.calibration.profiles))?;
    let data = prepare_data(cfg)?;
    let out_dir = cfg.output_path();
    let jobs: Vec<(String, u64)> =
        cfg.methods().into_iter().flat_map(|m| cfg.seeds.iter().map(move |&s| (m.clone(), s))).collect();
    let k = cfg.federation.clients;

    let results: Vec<(String, u64, PathBuf, String)> = thread_pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|(method, seed)| {
                let history = run_single(cfg, method, *seed, &profiles, &data)?;
                let text = persist::render_csv(&history.records, method, *seed, k);
                let path = out_dir.join(persist::csv_name(method, *seed));
                persist::write_atomic(&path, text.as_bytes())?;
                log::info!("wrote {}", path.display());
                Ok((method.clone(), *seed, path, text))
            })
            .collect::<Result<_, HarnessError>>()
    })?;

    let mut report = Report::default();
    for method in cfg.methods() {
        let streams = results
            .iter()
            .filter(|(m, ..)| *m == method)
            .map(|(_, seed, path, text)| {
                let rows = persist::parse_csv(text, &path.display().to_string())?;
                report::SeedStream::from_rows(*seed, &rows)
            })
            .collect::<Result<Vec<_>, _>>()?;
        report.methods.insert(method, aggregate_seeds(&streams)?);
    }
    write_report(&out_dir, &report)?;
    Ok(RunOutcome { output_dir: out_dir, csv_files: results.into_iter().map(|r| r.2).collect(), report })
}

pub fn write_report(dir: &Path, report: &Report) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(report).map_err(|e| HarnessError::Report(e.to_string()))?;
    persist::write_atomic(&dir.join("aggregate.json"), json.as_bytes())
}

/// Sorted composite-score table with pool membership.
pub fn rank_table(dir: &Path, weights: &CompositeWeights, qubits: Option<usize>) -> Result<String, HarnessError> {
    let mut profiles = load_profile_dir(dir)?;
    if let Some(q) = qubits {
        profiles = filter_by_qubits(&profiles, q);
    }
    let scores = composite_score(&profiles, weights)?;
    let ranking = rank_and_pool(&scores, None)?;
    let mut out = format!("{:<20} {:>12}  {}\n", "backend", "score", "pool");
    for (name, score) in &ranking.scored {
        let pool = ranking.pool_of(name).map_or_else(|| "-".to_string(), |g| g.to_string());
        let best = if *name == ranking.best { " (best)" } else { "" };
        let _ = writeln!(out, "{name:<20} {score:>12.6}  {pool}{best}");
    }
    Ok(out)
}

/// Per-client transpiled statistics and noise budgets for the first seed.
pub fn budget_table(cfg: &FederationConfig) -> Result<String, HarnessError> {
    cfg.validate()?;
    let profiles = load_profile_dir(cfg.resolve(&cfg.calibration.profiles))?;
    let data = prepare_data(cfg)?;
    let method = cfg.methods()[0].clone();
    let plan = prepare(&cfg.settings(&method)?, &profiles, data.0, data.1, cfg.seeds[0])?;
    let totals: Vec<f64> = plan.budgets.iter().map(|b| b.total).collect();
    let weights = qrail_weights(&totals, &cfg.qrail()).w;
    let mut out = format!(
        "{:>6} {:<20} {:<5} {:>6} {:>6} {:>6} {:>6} {:>10} {:>9}\n",
        "client", "backend", "group", "depth", "n_1q", "n_2q", "n_meas", "E_k", "w_qrail"
    );
    for ((c, b), w) in plan.clients.iter().zip(&plan.budgets).zip(&weights) {
        let _ = writeln!(
            out,
            "{:>6} {:<20} {:<5} {:>6} {:>6} {:>6} {:>6} {:>10.4} {:>9.4}",
            c.assignment.client_id,
            c.assignment.backend,
            c.assignment.group,
            c.stats.depth,
            c.stats.n_1q,
            c.stats.n_2q,
            c.stats.n_meas,
            b.total,
            w
        );
    }
    let _ = writeln!(out, "evaluation backend: {}", plan.ranking.best);
    Ok(out)
}
