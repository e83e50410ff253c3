//! Local SPSA training of the variational classifier on one client shard.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::exec::ExecError;
use crate::metrics::{cross_entropy, evaluate_metrics, Metrics};
use crate::qsim::ClassProbs;
use crate::seed::{self, tag};
use crate::vqc::ParamVector;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("client shard is empty")]
    EmptyShard,
    #[error("invalid optimizer settings: {0}")]
    Config(String),
}

/// Anything that maps an encoded input and parameters to class probabilities.
pub trait Runner: Sync {
    fn class_probs(&self, x: &[f64], theta: &[f64], shots: u64, seed: u64) -> Result<ClassProbs, ExecError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsaConfig {
    pub a0: f64,
    pub c0: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub local_steps: usize,
    pub batch_size: usize,
    pub train_shots: u64,
    pub eval_shots: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            a0: 0.2,
            c0: 0.1,
            alpha: 0.602,
            gamma: 0.101,
            local_steps: 5,
            batch_size: 16,
            train_shots: 128,
            eval_shots: 256,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.a0 > 0.0 && self.c0 > 0.0) {
            return Err(TrainError::Config("a0 and c0 must be positive".into()));
        }
        if !(0.0 < self.gamma && self.gamma < self.alpha && self.alpha <= 1.0) {
            return Err(TrainError::Config("need 0 < gamma < alpha <= 1".into()));
        }
        if self.batch_size == 0 || self.train_shots == 0 || self.eval_shots == 0 {
            return Err(TrainError::Config("batch size and shot counts must be positive".into()));
        }
        Ok(())
    }

    /// `(a_s, c_s)` for step index `s`.
    pub fn gains(&self, s: usize) -> (f64, f64) {
        let k = (s + 1) as f64;
        (self.a0 / k.powf(self.alpha), self.c0 / k.powf(self.gamma))
    }
}

/// One SPSA update with a caller-supplied perturbation `delta` in `{-1, +1}^P`.
pub fn spsa_step_with<E>(
    theta: &[f64],
    s: usize,
    cfg: &SpsaConfig,
    delta: &[f64],
    mut loss: impl FnMut(&[f64]) -> Result<f64, E>,
) -> Result<Vec<f64>, E> {
    let (a, c) = cfg.gains(s);
    let plus: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t + c * d).collect();
    let minus: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t - c * d).collect();
    let g = (loss(&plus)? - loss(&minus)?) / (2.0 * c);
    Ok(theta.iter().zip(delta).map(|(t, d)| t - a * g * d).collect())
}

pub fn rademacher(p: usize, rng: &mut seed::Rng) -> Vec<f64> {
    (0..p).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// One SPSA update with a Rademacher perturbation drawn from `seed`.
pub fn spsa_step<E>(
    theta: &[f64],
    s: usize,
    cfg: &SpsaConfig,
    seed: u64,
    loss: impl FnMut(&[f64]) -> Result<f64, E>,
) -> Result<Vec<f64>, E> {
    let delta = rademacher(theta.len(), &mut seed::rng(seed));
    spsa_step_with(theta, s, cfg, &delta, loss)
}

/// Mean cross-entropy over the rows `batch` of `ds`. Row `i` is executed with
/// sub-seed `derive(seed, [i])`, keyed by dataset index.
pub fn batch_loss<R: Runner + ?Sized>(
    runner: &R,
    theta: &[f64],
    ds: &Dataset,
    batch: &[usize],
    shots: u64,
    seed: u64,
) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut total = 0.0;
    for &i in batch {
        let p = runner.class_probs(ds.row(i), theta, shots, seed::derive(seed, &[i as u64]))?;
        total += cross_entropy(&p, ds.labels[i]);
    }
    Ok(total / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub theta_local: ParamVector,
    pub delta: ParamVector,
    pub metrics: Metrics,
}

/// Run `cfg.local_steps` SPSA steps on `shard` starting from `theta_start`.
///
/// Step `s` draws its batch from `[BATCH, s]`, its perturbation from
/// `[SPSA, s]`, and both loss evaluations share the shot seed `[SHOTS, s]`.
/// `delta` is measured against `theta_global`, which differs from the start
/// point only for personalized variants.
pub fn local_train<R: Runner + ?Sized>(
    runner: &R,
    shard: &Dataset,
    theta_global: &[f64],
    theta_start: &[f64],
    cfg: &SpsaConfig,
    seed: u64,
) -> Result<LocalResult, TrainError> {
    if shard.is_empty() {
        return Err(TrainError::EmptyShard);
    }
    let mut theta = theta_start.to_vec();
    for s in 0..cfg.local_steps {
        let batch: Vec<usize> = if shard.len() <= cfg.batch_size {
            (0..shard.len()).collect()
        } else {
            index::sample(&mut seed::rng_for(seed, &[tag::BATCH, s as u64]), shard.len(), cfg.batch_size).into_vec()
        };
        let shot_seed = seed::derive(seed, &[tag::SHOTS, s as u64]);
        theta = spsa_step(&theta, s, cfg, seed::derive(seed, &[tag::SPSA, s as u64]), |t| {
            batch_loss(runner, t, shard, &batch, cfg.train_shots, shot_seed)
        })?;
    }
    let metrics = evaluate_metrics(runner, &theta, shard, cfg.eval_shots, seed::derive(seed, &[tag::LOCAL_EVAL]))?;
    let delta = theta.iter().zip(theta_global).map(|(l, g)| l - g).collect::<Vec<_>>();
    Ok(LocalResult { theta_local: theta.into(), delta: delta.into(), metrics })
}

/// Initial global parameters, uniform in `[-scale, scale]`.
pub fn init_params(p: usize, scale: f64, seed: u64) -> ParamVector {
    let mut rng = seed::rng(seed);
    (0..p).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect::<Vec<_>>().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use approx::assert_relative_eq;
    use std::convert::Infallible;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Probabilities driven by the first parameter only; counts calls.
    struct Stub {
        calls: AtomicUsize,
    }

    impl Runner for Stub {
        fn class_probs(&self, x: &[f64], theta: &[f64], _shots: u64, _seed: u64) -> Result<ClassProbs, ExecError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let w = (theta[0] * x[0]).tanh().abs();
            Ok(ClassProbs([w, (1.0 - w) / 2.0, (1.0 - w) / 2.0]))
        }
    }

    /// Saturated one-hot on the label stored as the only feature.
    struct Oracle;

    impl Runner for Oracle {
        fn class_probs(&self, x: &[f64], _theta: &[f64], _shots: u64, _seed: u64) -> Result<ClassProbs, ExecError> {
            let mut p = [0.0; 3];
            p[x[0] as usize] = 1.0;
            Ok(ClassProbs(p))
        }
    }

    struct Fixed(Vec<ClassProbs>);

    impl Runner for Fixed {
        fn class_probs(&self, x: &[f64], _theta: &[f64], _shots: u64, _seed: u64) -> Result<ClassProbs, ExecError> {
            Ok(self.0[x[0] as usize])
        }
    }

    fn shard(n: usize) -> Dataset {
        Dataset::new((0..n).map(|i| 0.1 + i as f64 * 0.01).collect(), 1, (0..n).map(|i| i % 3).collect(), Split::Train)
            .unwrap()
    }

    #[test]
    fn hand_computed_step() {
        let cfg = SpsaConfig::default();
        let out = spsa_step_with(&[1.0], 0, &cfg, &[1.0], |t| Ok::<_, Infallible>(t[0] * t[0])).unwrap();
        assert_relative_eq!(out[0], 0.6, epsilon = 1e-12);
        let flat = spsa_step(&[0.3, -2.0], 4, &cfg, 11, |_| Ok::<_, Infallible>(7.0)).unwrap();
        assert_eq!(flat, vec![0.3, -2.0]);
    }

    #[test]
    fn gain_schedule() {
        let cfg = SpsaConfig::default();
        assert_eq!(cfg.gains(0), (0.2, 0.1));
        let (a9, c9) = cfg.gains(9);
        assert_relative_eq!(a9, 0.2 / 10f64.powf(0.602), epsilon = 1e-15);
        assert!((a9 - 0.0500).abs() < 5e-5 && (c9 - 0.0793).abs() < 5e-5);
        for s in 0..50 {
            let (a, c) = cfg.gains(s);
            let (a1, c1) = cfg.gains(s + 1);
            assert!(a1 < a && c1 < c);
        }
    }

    #[test]
    fn batch_loss_examples() {
        let ds = Dataset::new(vec![0.0, 1.0, 2.0], 1, vec![0, 1, 2], Split::Train).unwrap();
        assert_eq!(batch_loss(&Oracle, &[], &ds, &[1], 1, 0).unwrap(), 0.0);
        let fixed = Fixed(vec![ClassProbs([1.0, 0.0, 0.0]), ClassProbs::uniform()]);
        let two = Dataset::new(vec![0.0, 1.0], 1, vec![0, 0], Split::Train).unwrap();
        assert_relative_eq!(batch_loss(&fixed, &[], &two, &[0, 1], 1, 0).unwrap(), 3f64.ln() / 2.0, epsilon = 1e-12);
        let stub = Stub { calls: AtomicUsize::new(0) };
        let once = batch_loss(&stub, &[0.7], &ds, &[2], 64, 5).unwrap();
        let twice = batch_loss(&stub, &[0.7], &ds, &[2, 2], 64, 5).unwrap();
        assert_eq!(once, twice);
        assert!(matches!(batch_loss(&Oracle, &[], &ds, &[], 1, 0), Err(TrainError::EmptyBatch)));
    }

    #[test]
    fn local_train_counts_and_determinism() {
        let cfg = SpsaConfig { local_steps: 4, batch_size: 5, ..Default::default() };
        let ds = shard(30);
        let stub = Stub { calls: AtomicUsize::new(0) };
        let a = local_train(&stub, &ds, &[0.5, 0.1], &[0.5, 0.1], &cfg, 42).unwrap();
        // 2 loss evaluations per step, batch of 5 each, plus one pass over the shard
        assert_eq!(stub.calls.load(Ordering::Relaxed), 2 * 4 * 5 + 30);
        let b = local_train(&stub, &ds, &[0.5, 0.1], &[0.5, 0.1], &cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.delta.len(), 2);
        for (d, (l, g)) in a.delta.iter().zip(a.theta_local.iter().zip([0.5, 0.1])) {
            assert_eq!(*d, l - g);
        }
    }

    #[test]
    fn zero_steps_leave_theta() {
        let cfg = SpsaConfig { local_steps: 0, ..Default::default() };
        let r = local_train(&Stub { calls: AtomicUsize::new(0) }, &shard(4), &[0.2], &[0.2], &cfg, 1).unwrap();
        assert_eq!(r.delta.0, vec![0.0]);
        assert!(matches!(
            local_train(&Oracle, &shard(3).select(&[]), &[0.0], &[0.0], &cfg, 1),
            Err(TrainError::EmptyShard)
        ));
    }

    #[test]
    fn rademacher_average_recovers_gradient() {
        let (h, b) = ([[3.0, 1.0], [1.0, 2.0]], [0.5, -1.0]);
        let grad = |t: &[f64]| [h[0][0] * t[0] + h[0][1] * t[1] + b[0], h[1][0] * t[0] + h[1][1] * t[1] + b[1]];
        let f = |t: &[f64]| {
            0.5 * (h[0][0] * t[0] * t[0] + 2.0 * h[0][1] * t[0] * t[1] + h[1][1] * t[1] * t[1]) + b[0] * t[0] + b[1] * t[1]
        };
        let theta = [0.4, -0.3];
        let c = 0.1;
        let mut rng = seed::rng(3);
        let mut acc = [0.0; 2];
        let n = 10_000;
        for _ in 0..n {
            let d = rademacher(2, &mut rng);
            let plus = [theta[0] + c * d[0], theta[1] + c * d[1]];
            let minus = [theta[0] - c * d[0], theta[1] - c * d[1]];
            let g = (f(&plus) - f(&minus)) / (2.0 * c);
            acc[0] += g * d[0] / n as f64;
            acc[1] += g * d[1] / n as f64;
        }
        let truth = grad(&theta);
        for m in 0..2 {
            assert!((acc[m] - truth[m]).abs() <= 0.02 * truth[m].abs(), "{acc:?} vs {truth:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(SpsaConfig::default().validate().is_ok());
        assert!(SpsaConfig { gamma: 0.7, ..Default::default() }.validate().is_err());
        assert!(SpsaConfig { a0: 0.0, ..Default::default() }.validate().is_err());
    }
}
