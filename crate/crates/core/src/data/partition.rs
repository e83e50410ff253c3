use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PartitionMode {
    Iid,
    Dirichlet { alpha: f64 },
}

/// Per-client index lists over a training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub clients: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }
}

/// Largest-remainder rounding of `weights * total` to integers summing to `total`.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

fn dirichlet(alpha: f64, k: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.into_iter().map(|g| g / sum).collect()
    } else {
        // every gamma draw underflowed; fall back to a single random owner
        let mut one_hot = vec![0.0; k];
        one_hot[rng.random_range(0..k)] = 1.0;
        one_hot
    }
}

/// Split sample indices `0..labels.len()` across `k` clients.
pub fn partition(labels: &[usize], k: usize, mode: PartitionMode, seed: u64) -> Result<Partition, DataError> {
    let n = labels.len();
    if k == 0 {
        return Err(DataError::Invalid("number of clients must be positive".into()));
    }
    if n < k {
        return Err(DataError::Invalid(format!("{n} samples cannot cover {k} clients")));
    }
    let mut rng = seed::rng(seed);
    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); k];
    match mode {
        PartitionMode::Iid => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let (base, extra) = (n / k, n % k);
            let mut start = 0;
            for (c, client) in clients.iter_mut().enumerate() {
                let size = base + usize::from(c < extra);
                client.extend_from_slice(&idx[start..start + size]);
                start += size;
            }
        }
        PartitionMode::Dirichlet { alpha } => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(DataError::Invalid(format!("dirichlet alpha must be positive, got {alpha}")));
            }
            let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
            for class in 0..num_classes {
                let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
                if members.is_empty() {
                    continue;
                }
                members.shuffle(&mut rng);
                let share = dirichlet(alpha, k, &mut rng);
                let mut start = 0;
                for (client, count) in clients.iter_mut().zip(apportion(&share, members.len())) {
                    client.extend_from_slice(&members[start..start + count]);
                    start += count;
                }
            }
            while let Some(empty) = clients.iter().position(Vec::is_empty) {
                let donor = (0..k)
                    .max_by(|&a, &b| clients[a].len().cmp(&clients[b].len()).then(b.cmp(&a)))
                    .expect("k > 0");
                let moved = clients[donor].pop().expect("donor is the largest client and n >= k");
                clients[empty].push(moved);
            }
        }
    }
    Ok(Partition { clients })
}
