use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::exec::ExecError;
use crate::qsim::ClassProbs;
use crate::seed;
use crate::train::Runner;

/// Lower clamp on the predicted probability of the true class.
pub const PROB_FLOOR: f64 = 1e-10;

pub fn cross_entropy(p: &ClassProbs, y: usize) -> f64 {
    -p.0[y].clamp(PROB_FLOOR, 1.0).ln()
}

pub fn accuracy(probs: &[ClassProbs], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = probs.iter().zip(labels).filter(|(p, &y)| p.argmax() == y).count();
    hits as f64 / labels.len() as f64
}

/// Mann-Whitney AUC of `scores` for the positives flagged in `positive`.
/// Tied scores contribute one half. `None` when either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&b| b).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Macro one-vs-rest AUC over the three classes. Classes without both
/// positives and negatives are skipped; 0.5 when none qualify.
pub fn macro_auc(probs: &[ClassProbs], labels: &[usize]) -> f64 {
    let per_class: Vec<f64> = (0..3)
        .filter_map(|c| {
            let scores: Vec<f64> = probs.iter().map(|p| p.0[c]).collect();
            let positive: Vec<bool> = labels.iter().map(|&y| y == c).collect();
            binary_auc(&scores, &positive)
        })
        .collect();
    if per_class.is_empty() {
        0.5
    } else {
        per_class.iter().sum::<f64>() / per_class.len() as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: f64,
    pub auc: f64,
}

impl Metrics {
    pub fn from_probs(probs: &[ClassProbs], labels: &[usize]) -> Self {
        let loss = if labels.is_empty() {
            0.0
        } else {
            probs.iter().zip(labels).map(|(p, &y)| cross_entropy(p, y)).sum::<f64>() / labels.len() as f64
        };
        Self { loss, accuracy: accuracy(probs, labels), auc: macro_auc(probs, labels) }
    }
}

/// Loss, accuracy and AUC of `theta` on every row of `ds`. Row `i` runs with
/// the sub-seed `derive(seed, [i])`, so results do not depend on thread count.
pub fn evaluate_metrics<R: Runner + ?Sized>(
    runner: &R,
    theta: &[f64],
    ds: &Dataset,
    shots: u64,
    seed: u64,
) -> Result<Metrics, ExecError> {
    let probs = (0..ds.len())
        .into_par_iter()
        .map(|i| runner.class_probs(ds.row(i), theta, shots, seed::derive(seed, &[i as u64])))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Metrics::from_probs(&probs, &ds.labels))
}
