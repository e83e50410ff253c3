use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::persist::{parse_csv, CsvRow};
use super::HarnessError;

/// Summary metrics, in report column order. `local_*` average over clients.
pub const METRICS: [&str; 8] =
    ["train_loss", "train_acc", "train_auc", "test_loss", "test_acc", "test_auc", "local_acc", "local_auc"];

/// Normal quantile for a two-sided 95% interval.
const Z95: f64 = 1.96;

/// One seed's per-round values for every entry of [`METRICS`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeedStream {
    pub seed: u64,
    pub rounds: Vec<usize>,
    pub values: Vec<[f64; 8]>,
}

impl SeedStream {
    pub fn from_rows(seed: u64, rows: &[CsvRow]) -> Result<Self, HarnessError> {
        let mut values = Vec::with_capacity(rows.len());
        for r in rows {
            let mut v = [0.0; 8];
            for (slot, name) in v.iter_mut().zip(&METRICS[..6]) {
                *slot = r.get(name).ok_or_else(|| HarnessError::Report(format!("missing column {name}")))?;
            }
            v[6] = mean(&r.prefixed("local_acc_"));
            v[7] = mean(&r.prefixed("local_auc_"));
            values.push(v);
        }
        Ok(Self { seed, rounds: rows.iter().map(|r| r.round).collect(), values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub ci95: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub seeds: Vec<u64>,
    /// Set when only one seed ran; its std values are reported as 0.
    pub single_seed: bool,
    pub rounds: Vec<usize>,
    pub series: BTreeMap<String, Series>,
    pub final_round: BTreeMap<String, Summary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub methods: BTreeMap<String, MethodReport>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for one value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

fn summary(v: &[f64]) -> Summary {
    let (mean, std) = mean_std(v);
    let half = Z95 * std / (v.len() as f64).sqrt();
    Summary { mean, std, ci95: [mean - half, mean + half] }
}

pub fn aggregate_seeds(streams: &[SeedStream]) -> Result<MethodReport, HarnessError> {
    let first = streams.first().ok_or_else(|| HarnessError::Report("no seeds to aggregate".into()))?;
    if let Some(s) = streams.iter().find(|s| s.rounds != first.rounds) {
        return Err(HarnessError::Report(format!(
            "seed {} has rounds {:?}, seed {} has {:?}",
            s.seed, s.rounds, first.seed, first.rounds
        )));
    }
    let mut series = BTreeMap::new();
    let mut final_round = BTreeMap::new();
    for (m, name) in METRICS.iter().enumerate() {
        let per_round: Vec<Vec<f64>> =
            (0..first.rounds.len()).map(|t| streams.iter().map(|s| s.values[t][m]).collect()).collect();
        let (means, stds) = per_round.iter().map(|v| mean_std(v)).unzip();
        series.insert(name.to_string(), Series { mean: means, std: stds });
        if let Some(last) = per_round.last() {
            final_round.insert(name.to_string(), summary(last));
        }
    }
    Ok(MethodReport {
        seeds: streams.iter().map(|s| s.seed).collect(),
        single_seed: streams.len() == 1,
        rounds: first.rounds.clone(),
        series,
        final_round,
    })
}

/// Aggregate every `*_seed*.csv` in `dir`, grouped by method.
pub fn collect_runs(dir: &Path) -> Result<Report, HarnessError> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut files: Vec<_> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.contains("_seed"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::Report(format!("no run CSV files in {}", dir.display())));
    }
    let mut by_method: BTreeMap<String, Vec<SeedStream>> = BTreeMap::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| HarnessError::io(&f, e))?;
        let rows = parse_csv(&text, &f.display().to_string())?;
        let Some(first) = rows.first() else { continue };
        let stream = SeedStream::from_rows(first.seed, &rows)?;
        by_method.entry(first.method.clone()).or_default().push(stream);
    }
    let mut report = Report::default();
    for (method, mut streams) in by_method {
        streams.sort_by_key(|s| s.seed);
        report.methods.insert(method, aggregate_seeds(&streams)?);
    }
    Ok(report)
}

/// Final-round table, one row per method.
pub fn render_summary(report: &Report) -> String {
    let mut out = format!("{:<16} {:>5}", "method", "seeds");
    for name in METRICS {
        let _ = write!(out, " {name:>19}");
    }
    out.push('\n');
    for (method, r) in &report.methods {
        let _ = write!(out, "{method:<16} {:>5}", r.seeds.len());
        for name in METRICS {
            let s = r.final_round.get(name).copied().unwrap_or(Summary { mean: f64::NAN, std: 0.0, ci95: [0.0; 2] });
            let _ = write!(out, " {:>19}", format!("{:.4} ± {:.4}", s.mean, s.std));
        }
        if r.single_seed {
            out.push_str("  (single seed: std not estimated)");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stream(seed: u64, test_acc: &[f64]) -> SeedStream {
        SeedStream {
            seed,
            rounds: (1..=test_acc.len()).collect(),
            values: test_acc.iter().map(|&a| [0.0, 0.0, 0.0, 0.0, a, 0.0, 0.0, 0.0]).collect(),
        }
    }

    #[test]
    fn three_seed_example() {
        let r = aggregate_seeds(&[stream(1, &[0.5, 0.86]), stream(2, &[0.5, 0.88]), stream(3, &[0.5, 0.89])]).unwrap();
        let s = r.final_round["test_acc"];
        assert_relative_eq!(s.mean, 0.876667, epsilon = 1e-6);
        assert_relative_eq!(s.std, 0.015275, epsilon = 1e-6);
        assert_relative_eq!(s.ci95[1] - s.mean, 1.96 * 0.0152753 / 3f64.sqrt(), epsilon = 1e-6);
        assert_eq!(r.series["test_acc"].std[0], 0.0);
        assert!(!r.single_seed);
    }

    #[test]
    fn single_and_identical_seeds() {
        let r = aggregate_seeds(&[stream(1, &[0.7])]).unwrap();
        assert!(r.single_seed);
        assert_eq!(r.final_round["test_acc"].std, 0.0);
        let r = aggregate_seeds(&[stream(1, &[0.3, 0.7]), stream(2, &[0.3, 0.7])]).unwrap();
        assert_eq!(r.series["test_acc"].std, vec![0.0, 0.0]);
    }

    #[test]
    fn ragged_streams_fail() {
        assert!(aggregate_seeds(&[stream(1, &[0.1, 0.2]), stream(2, &[0.1])]).is_err());
        assert!(aggregate_seeds(&[]).is_err());
    }
}
