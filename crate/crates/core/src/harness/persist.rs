//! Per-round CSV streams.
//!
//! Columns: `round, method, seed`, global train/test loss, accuracy and AUC,
//! then `w_0..w_{K-1}`, `local_acc_0..local_acc_{K-1}` and
//! `local_auc_0..local_auc_{K-1}`. Numbers carry 6 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::fed::RoundRecord;

/// `%g`-style formatting with `sig` significant digits.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sig_i = sig as i32;
    // take the exponent after rounding, which may carry into the next decade
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let exp_rounded: i32 = e.parse().expect("integer exponent");
    if exp_rounded < -4 || exp_rounded >= sig_i {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp_rounded < 0 { '-' } else { '+' }, exp_rounded.abs());
    }
    let decimals = (sig_i - 1 - exp_rounded).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const SIG_DIGITS: usize = 6;

pub fn header(k: usize) -> String {
    let mut cols: Vec<String> = [
        "round", "method", "seed", "train_loss", "train_acc", "train_auc", "test_loss", "test_acc", "test_auc",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..k).map(|i| format!("w_{i}")));
    cols.extend((0..k).map(|i| format!("local_acc_{i}")));
    cols.extend((0..k).map(|i| format!("local_auc_{i}")));
    cols.join(",")
}

/// Append one record as a CSV line (with trailing newline) to `out`.
pub fn persist_round(record: &RoundRecord, method: &str, seed: u64, out: &mut String) {
    let f = |v: f64| fmt_sig(v, SIG_DIGITS);
    let _ = write!(
        out,
        "{},{method},{seed},{},{},{},{},{},{}",
        record.round,
        f(record.train.loss),
        f(record.train.accuracy),
        f(record.train.auc),
        f(record.test.loss),
        f(record.test.accuracy),
        f(record.test.auc)
    );
    for v in record
        .weights
        .iter()
        .copied()
        .chain(record.local.iter().map(|m| m.accuracy))
        .chain(record.local.iter().map(|m| m.auc))
    {
        let _ = write!(out, ",{}", f(v));
    }
    out.push('\n');
}

pub fn render_csv(records: &[RoundRecord], method: &str, seed: u64, k: usize) -> String {
    let mut out = header(k);
    out.push('\n');
    for r in records {
        persist_round(r, method, seed, &mut out);
    }
    out
}

pub fn csv_name(method: &str, seed: u64) -> String {
    format!("{method}_seed{seed}.csv")
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    tmp.write_all(contents).map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

/// One parsed CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub round: usize,
    pub method: String,
    pub seed: u64,
    /// Columns after `seed`, keyed by header name, in file order.
    pub values: Vec<(String, f64)>,
}

impl CsvRow {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn prefixed(&self, prefix: &str) -> Vec<f64> {
        self.values
            .iter()
            .filter(|(k, _)| k.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok()))
            .map(|(_, v)| *v)
            .collect()
    }
}

pub fn parse_csv(text: &str, origin: &str) -> Result<Vec<CsvRow>, HarnessError> {
    let bad = |line: usize, msg: String| HarnessError::Report(format!("{origin}:{line}: {msg}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "empty file".into()))?.split(',').collect();
    if header.len() < 9 || header[..3] != ["round", "method", "seed"] {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(bad(i + 2, format!("{} cells, header has {}", cells.len(), header.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i + 2, format!("{s:?}: {e}")));
        let values = header[3..]
            .iter()
            .zip(&cells[3..])
            .map(|(h, c)| Ok((h.to_string(), num(c)?)))
            .collect::<Result<_, HarnessError>>()?;
        rows.push(CsvRow {
            round: cells[0].parse().map_err(|e| bad(i + 2, format!("round: {e}")))?,
            method: cells[1].to_string(),
            seed: cells[2].parse().map_err(|e| bad(i + 2, format!("seed: {e}")))?,
            values,
        });
    }
    Ok(rows)
}
