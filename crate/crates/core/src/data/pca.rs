use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{DataError, Dataset};

/// Relative eigenvalue threshold below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

/// Fitted projection onto the top principal directions, followed by a
/// per-feature min-max map onto `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d x q` matrix, column-major: component `k` is `components[k*d..(k+1)*d]`.
    pub components: Vec<f64>,
    pub dim: usize,
    pub num_components: usize,
    pub eigenvalues: Vec<f64>,
    pub train_min: Vec<f64>,
    pub train_max: Vec<f64>,
}

impl PcaModel {
    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k * self.dim..(k + 1) * self.dim]
    }

    /// Centered projection, before scaling.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        (0..self.num_components)
            .map(|k| {
                self.component(k)
                    .iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect()
    }

    /// Projection scaled to `[0, pi]` with train bounds; values are clamped.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        self.project(row)
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                let range = self.train_max[k] - self.train_min[k];
                if range <= f64::EPSILON {
                    return 0.0;
                }
                (PI * (v - self.train_min[k]) / range).clamp(0.0, PI)
            })
            .collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        let features = ds.rows().flat_map(|r| self.transform_row(r)).collect();
        Dataset { features, cols: self.num_components, labels: ds.labels.clone(), split: ds.split }
    }

    /// Fraction of total variance captured by the retained components.
    pub fn explained_variance_ratio(&self, total_variance: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l / total_variance).collect()
    }
}

/// Fit PCA on `train` and map both splits to `q` features in `[0, pi]`.
pub fn pca_fit_transform(train: &Dataset, test: &Dataset, q: usize) -> Result<(PcaModel, Dataset, Dataset), DataError> {
    let d = train.cols;
    let n = train.len();
    if q == 0 || q > d {
        return Err(DataError::Invalid(format!("cannot keep {q} components of {d}-dimensional data")));
    }
    if test.cols != d {
        return Err(DataError::Invalid(format!("test has {} columns, train has {d}", test.cols)));
    }
    if n < q + 1 {
        return Err(DataError::Invalid(format!("need at least {} training rows, got {n}", q + 1)));
    }

    let mut mean = vec![0.0; d];
    for row in train.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| train.row(i)[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > RANK_TOL * top.max(f64::MIN_POSITIVE)).count();
    if rank < q {
        return Err(DataError::RankDeficient { achievable: rank, requested: q });
    }

    let mut components = Vec::with_capacity(d * q);
    let mut eigenvalues = Vec::with_capacity(q);
    for &idx in order.iter().take(q) {
        let col = eig.eigenvectors.column(idx);
        let pivot = col.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        components.extend(col.iter().map(|v| v * sign));
        eigenvalues.push(eig.eigenvalues[idx]);
    }

    let mut model = PcaModel {
        mean,
        components,
        dim: d,
        num_components: q,
        eigenvalues,
        train_min: vec![f64::INFINITY; q],
        train_max: vec![f64::NEG_INFINITY; q],
    };
    for row in train.rows() {
        for (k, v) in model.project(row).into_iter().enumerate() {
            model.train_min[k] = model.train_min[k].min(v);
            model.train_max[k] = model.train_max[k].max(v);
        }
    }
    let train_out = model.transform(train);
    let test_out = model.transform(test);
    Ok((model, train_out, test_out))
}
