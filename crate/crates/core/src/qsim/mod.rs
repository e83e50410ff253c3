//! Shot-based trajectory simulation of routed circuits under a calibration
//! derived stochastic Pauli noise model.
//!
//! # Draw order
//!
//! `run_shots` seeds one `ChaCha8Rng` from the call seed and, for every shot
//! in sequence, consumes uniforms in this order:
//!
//! 1. one per gate whose error probability is nonzero, in circuit order; an
//!    error fires when `u < p`, and the Pauli is chosen from the same draw as
//!    `floor(u / p * n)` over the `n` non-identity Paulis (3 for one qubit,
//!    15 for two qubits, index `4 * a + b` with `0=I, 1=X, 2=Y, 3=Z`);
//! 2. when the idle model is enabled, two per active qubit in ascending
//!    physical order (amplitude flip, then phase flip);
//! 3. one for the computational-basis outcome (inverse CDF over basis index);
//! 4. one per measured bit with nonzero readout error, in classical-bit order.
//!
//! Shots whose step 1 and 2 draws fire nothing are sampled from the ideal
//! distribution computed once per call; other shots replay the circuit with
//! the drawn Paulis inserted. Both paths consume the same draws, so counts
//! are a pure function of `(circuit, noise model, shots, seed)`.

mod state;

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::BackendProfile;
use crate::seed;
use crate::transpile::TranspiledCircuit;
use crate::vqc::{Gate, GateList};

pub use state::StateVector;

/// Dense statevector bound for shot simulation.
pub const MAX_SIM_QUBITS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("circuit touches {0} qubits, above the simulation bound of {MAX_SIM_QUBITS}")]
    TooManyQubits(usize),
    #[error("shot count must be positive")]
    ZeroShots,
    #[error("circuit must measure exactly classical bits 0 and 1")]
    BadMeasurement,
    #[error("no shots to normalize")]
    EmptyCounts,
}

/// Per-physical-qubit idle flips applied just before measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct IdleNoise {
    pub p_amp: Vec<f64>,
    pub p_phase: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub p_1q: Vec<f64>,
    pub p_2q: HashMap<(usize, usize), f64>,
    pub p_ro: Vec<f64>,
    pub idle: Option<IdleNoise>,
}

fn clamp01(p: f64) -> f64 {
    if p.is_nan() {
        0.0
    } else {
        p.clamp(0.0, 1.0)
    }
}

impl NoiseModel {
    /// Depolarizing gate noise plus readout flips from a calibration profile.
    pub fn from_profile(profile: &BackendProfile) -> Self {
        Self {
            p_1q: profile.err_1q.iter().copied().map(clamp01).collect(),
            p_2q: profile
                .coupling
                .edges()
                .iter()
                .map(|&(a, b)| ((a, b), clamp01(profile.edge_error(a, b).unwrap_or(0.0))))
                .collect(),
            p_ro: profile.readout_error.iter().copied().map(clamp01).collect(),
            idle: None,
        }
    }

    /// Enable idle amplitude/phase flips for a circuit of transpiled `depth`.
    pub fn with_idle(mut self, profile: &BackendProfile, depth: usize) -> Self {
        let t = depth as f64 * profile.gate_time_us;
        self.idle = Some(IdleNoise {
            p_amp: profile.t1_us.iter().map(|t1| clamp01(1.0 - (-t / t1).exp())).collect(),
            p_phase: profile.t2_us.iter().map(|t2| clamp01(1.0 - (-t / t2).exp())).collect(),
        });
        self
    }

    pub fn noiseless(num_qubits: usize) -> Self {
        Self { p_1q: vec![0.0; num_qubits], p_2q: HashMap::new(), p_ro: vec![0.0; num_qubits], idle: None }
    }

    fn edge(&self, a: usize, b: usize) -> f64 {
        self.p_2q.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
    }
}

/// Bitstring counts over the two measured classical bits, indexed by
/// `2 * c0 + c1` (so index 1 is the string "01").
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub counts: [u64; 4],
}

impl ShotCounts {
    pub const LABELS: [&'static str; 4] = ["00", "01", "10", "11"];

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, bits: &str) -> u64 {
        Self::LABELS.iter().position(|l| *l == bits).map_or(0, |i| self.counts[i])
    }
}

/// Probabilities over the three class labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbs(pub [f64; 3]);

impl ClassProbs {
    pub fn uniform() -> Self {
        Self([1.0 / 3.0; 3])
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for c in 1..3 {
            if self.0[c] > self.0[best] {
                best = c;
            }
        }
        best
    }
}

/// Map "00", "01", "10" to classes 0, 1, 2, dropping "11" and renormalizing.
pub fn class_probs(c: &ShotCounts) -> Result<ClassProbs, SimError> {
    let total = c.total();
    if total == 0 {
        return Err(SimError::EmptyCounts);
    }
    let valid = total - c.counts[3];
    if valid == 0 {
        return Ok(ClassProbs::uniform());
    }
    let v = valid as f64;
    Ok(ClassProbs([c.counts[0] as f64 / v, c.counts[1] as f64 / v, c.counts[2] as f64 / v]))
}

/// Noiseless final state of a gate list; barriers and measurements are skipped.
pub fn ideal_state(g: &GateList) -> StateVector {
    let mut s = StateVector::zero(g.num_qubits);
    for gate in &g.gates {
        match *gate {
            Gate::Ry { qubit, angle } => s.apply_ry(qubit, angle),
            Gate::Rz { qubit, angle } => s.apply_rz(qubit, angle),
            Gate::Cx { control, target } => s.apply_cx(control, target),
            Gate::Barrier | Gate::Measure { .. } => {}
        }
    }
    s
}

#[derive(Debug, Clone, Copy)]
enum OpKind {
    Ry { q: usize, c: f64, s: f64 },
    Rz { q: usize, phase: Complex64 },
    Cx { c: usize, t: usize },
}

#[derive(Debug, Clone, Copy)]
struct Op {
    kind: OpKind,
    p_err: f64,
}

/// A routed circuit lowered to dense qubits with noise attached.
struct Executable {
    num_qubits: usize,
    ops: Vec<Op>,
    /// `(dense qubit, readout flip probability)` for classical bits 0 and 1.
    meas: [(usize, f64); 2],
    /// Per dense qubit idle flip probabilities.
    idle: Option<Vec<(f64, f64)>>,
}

impl Executable {
    fn new(t: &TranspiledCircuit, nm: &NoiseModel) -> Result<Self, SimError> {
        let (dense, active) = t.compacted();
        if active.len() > MAX_SIM_QUBITS {
            return Err(SimError::TooManyQubits(active.len()));
        }
        let p1 = |d: usize| nm.p_1q.get(active[d]).copied().unwrap_or(0.0);
        let mut ops = Vec::with_capacity(dense.gates.len());
        let mut meas: [Option<(usize, f64)>; 2] = [None, None];
        for gate in &dense.gates {
            match *gate {
                Gate::Ry { qubit, angle } => {
                    let (s, c) = (0.5 * angle).sin_cos();
                    ops.push(Op { kind: OpKind::Ry { q: qubit, c, s }, p_err: p1(qubit) });
                }
                Gate::Rz { qubit, angle } => ops.push(Op {
                    kind: OpKind::Rz { q: qubit, phase: Complex64::from_polar(1.0, -0.5 * angle) },
                    p_err: p1(qubit),
                }),
                Gate::Cx { control, target } => ops.push(Op {
                    kind: OpKind::Cx { c: control, t: target },
                    p_err: nm.edge(active[control], active[target]),
                }),
                Gate::Measure { qubit, clbit } => {
                    let slot = meas.get_mut(clbit).ok_or(SimError::BadMeasurement)?;
                    if slot.is_some() {
                        return Err(SimError::BadMeasurement);
                    }
                    *slot = Some((qubit, nm.p_ro.get(active[qubit]).copied().unwrap_or(0.0)));
                }
                Gate::Barrier => {}
            }
        }
        let meas = match meas {
            [Some(a), Some(b)] => [a, b],
            _ => return Err(SimError::BadMeasurement),
        };
        let idle = nm.idle.as_ref().map(|idle| {
            active
                .iter()
                .map(|&p| {
                    (
                        idle.p_amp.get(p).copied().unwrap_or(0.0),
                        idle.p_phase.get(p).copied().unwrap_or(0.0),
                    )
                })
                .collect()
        });
        Ok(Self { num_qubits: active.len(), ops, meas, idle })
    }

    fn evolve(&self, state: &mut StateVector, events: &[(usize, u8)], idle_flips: &[(usize, bool, bool)]) {
        state.reset();
        let mut next = events.iter().peekable();
        for (i, op) in self.ops.iter().enumerate() {
            match op.kind {
                OpKind::Ry { q, c, s } => state.apply_ry_cs(q, c, s),
                OpKind::Rz { q, phase } => state.apply_rz_phase(q, phase),
                OpKind::Cx { c, t } => state.apply_cx(c, t),
            }
            while let Some(&&(at, code)) = next.peek() {
                if at != i {
                    break;
                }
                match op.kind {
                    OpKind::Ry { q, .. } | OpKind::Rz { q, .. } => state.apply_pauli(q, code),
                    OpKind::Cx { c, t } => {
                        state.apply_pauli(c, code / 4);
                        state.apply_pauli(t, code % 4);
                    }
                }
                next.next();
            }
        }
        for &(q, x, z) in idle_flips {
            if x {
                state.apply_x(q);
            }
            if z {
                state.apply_z(q);
            }
        }
    }

    fn outcome(&self, basis: usize) -> [bool; 2] {
        [basis >> self.meas[0].0 & 1 == 1, basis >> self.meas[1].0 & 1 == 1]
    }
}

fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    cdf.partition_point(|&c| c <= u * total).min(cdf.len() - 1)
}

/// Execute `shots` noisy trajectories of a routed circuit.
pub fn run_shots(t: &TranspiledCircuit, nm: &NoiseModel, shots: u64, seed: u64) -> Result<ShotCounts, SimError> {
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    let exe = Executable::new(t, nm)?;
    let mut state = StateVector::zero(exe.num_qubits);
    exe.evolve(&mut state, &[], &[]);
    let ideal_cdf: Vec<f64> = state
        .amplitudes()
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.norm_sqr();
            Some(*acc)
        })
        .collect();

    let mut rng = seed::rng(seed);
    let mut counts = ShotCounts::default();
    let mut events: Vec<(usize, u8)> = Vec::new();
    let mut idle_flips: Vec<(usize, bool, bool)> = Vec::new();
    let mut cdf = vec![0.0; ideal_cdf.len()];

    for _ in 0..shots {
        events.clear();
        idle_flips.clear();
        for (i, op) in exe.ops.iter().enumerate() {
            if op.p_err > 0.0 {
                let u: f64 = rng.random();
                if u < op.p_err {
                    let n = if matches!(op.kind, OpKind::Cx { .. }) { 15.0 } else { 3.0 };
                    let code = 1 + ((u / op.p_err * n) as u8).min(n as u8 - 1);
                    events.push((i, code));
                }
            }
        }
        if let Some(idle) = &exe.idle {
            for (q, &(p_amp, p_phase)) in idle.iter().enumerate() {
                let x = rng.random::<f64>() < p_amp;
                let z = rng.random::<f64>() < p_phase;
                if x || z {
                    idle_flips.push((q, x, z));
                }
            }
        }

        let u: f64 = rng.random();
        let basis = if events.is_empty() && idle_flips.is_empty() {
            sample_cdf(&ideal_cdf, u)
        } else {
            exe.evolve(&mut state, &events, &idle_flips);
            let mut acc = 0.0;
            for (slot, a) in cdf.iter_mut().zip(state.amplitudes()) {
                acc += a.norm_sqr();
                *slot = acc;
            }
            sample_cdf(&cdf, u)
        };

        let mut bits = exe.outcome(basis);
        for (bit, &(_, p_ro)) in bits.iter_mut().zip(&exe.meas) {
            if p_ro > 0.0 && rng.random::<f64>() < p_ro {
                *bit = !*bit;
            }
        }
        counts.counts[2 * usize::from(bits[0]) + usize::from(bits[1])] += 1;
    }
    Ok(counts)
}

/// Exact outcome distribution (indexed like `ShotCounts`) of a routed circuit
/// without gate noise, including readout flips.
pub fn ideal_outcome_distribution(t: &TranspiledCircuit, nm: &NoiseModel) -> Result<[f64; 4], SimError> {
    let exe = Executable::new(t, nm)?;
    let mut state = StateVector::zero(exe.num_qubits);
    exe.evolve(&mut state, &[], &[]);
    let mut dist = [0.0; 4];
    for (basis, a) in state.amplitudes().iter().enumerate() {
        let [b0, b1] = exe.outcome(basis);
        dist[2 * usize::from(b0) + usize::from(b1)] += a.norm_sqr();
    }
    let [(_, r0), (_, r1)] = exe.meas;
    let mut out = [0.0; 4];
    for (o, p) in dist.iter().enumerate() {
        for flip in 0..4usize {
            let f0 = flip >> 1 & 1 == 1;
            let f1 = flip & 1 == 1;
            let w = (if f0 { r0 } else { 1.0 - r0 }) * (if f1 { r1 } else { 1.0 - r1 });
            out[o ^ flip] += p * w;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transpile::{route, testutil::line, Layout};
    use crate::vqc::{build_circuit, CircuitSpec, Topology};

    fn identity_route(g: &GateList) -> TranspiledCircuit {
        route(g, &Layout::identity(g.num_qubits), &line(g.num_qubits)).unwrap()
    }

    #[test]
    fn zero_angles_give_all_zero_outcomes() {
        let s = CircuitSpec::new(4, 4, Topology::Ring, 3).unwrap();
        let g = build_circuit(&s, &[0.0; 4], &[0.0; 32]).unwrap();
        let t = crate::transpile::transpile(&g, &line(4)).unwrap();
        let c = run_shots(&t, &NoiseModel::noiseless(4), 256, 1).unwrap();
        assert_eq!(c.get("00"), 256);
    }

    #[test]
    fn class_prob_rules() {
        let p = class_probs(&ShotCounts { counts: [50, 30, 20, 0] }).unwrap();
        assert_eq!(p.0, [0.5, 0.3, 0.2]);
        let p = class_probs(&ShotCounts { counts: [40, 30, 20, 10] }).unwrap();
        assert!((p.0[0] - 4.0 / 9.0).abs() < 1e-15);
        assert!((p.0[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.0[2] - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(class_probs(&ShotCounts { counts: [0, 0, 0, 100] }).unwrap(), ClassProbs::uniform());
        assert_eq!(class_probs(&ShotCounts::default()), Err(SimError::EmptyCounts));
    }

    #[test]
    fn readout_flip_rate() {
        let mut g = GateList::new(2);
        g.push(Gate::Measure { qubit: 0, clbit: 0 });
        g.push(Gate::Measure { qubit: 1, clbit: 1 });
        let t = identity_route(&g);
        let mut nm = NoiseModel::noiseless(2);
        nm.p_ro[0] = 0.1;
        let shots = 10_000;
        let c = run_shots(&t, &nm, shots, 5).unwrap();
        let ones = (c.get("10") + c.get("11")) as f64 / shots as f64;
        assert!((ones - 0.1).abs() <= 0.01, "{ones}");
        assert_eq!(c.get("01") + c.get("11"), 0);
    }

    #[test]
    fn fixed_seed_reproduces_counts() {
        let s = CircuitSpec::new(3, 2, Topology::Full, 1).unwrap();
        let g = build_circuit(&s, &[0.4, 1.0, 2.0], &[0.3; 12]).unwrap();
        let t = identity_route(&g);
        let mut nm = NoiseModel::from_profile(&line(3));
        nm.p_2q.values_mut().for_each(|p| *p = 0.1);
        let a = run_shots(&t, &nm, 500, 77).unwrap();
        let b = run_shots(&t, &nm, 500, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total(), 500);
        assert_ne!(a, run_shots(&t, &nm, 500, 78).unwrap());
    }

    #[test]
    fn shot_errors() {
        let g = build_circuit(&CircuitSpec::new(2, 1, Topology::Linear, 1).unwrap(), &[0.0; 2], &[0.0; 4]).unwrap();
        let t = identity_route(&g);
        assert_eq!(run_shots(&t, &NoiseModel::noiseless(2), 0, 1), Err(SimError::ZeroShots));
        let bare = identity_route(&g.without_measurements());
        assert_eq!(run_shots(&bare, &NoiseModel::noiseless(2), 1, 1), Err(SimError::BadMeasurement));
    }

    #[test]
    fn idle_model_probabilities() {
        let p = line(2);
        let nm = NoiseModel::from_profile(&p).with_idle(&p, 10);
        let idle = nm.idle.unwrap();
        let expect = 1.0 - (-(10.0 * 0.05) / 100.0f64).exp();
        assert!((idle.p_amp[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn idle_flips_bias_outcomes() {
        let mut g = GateList::new(2);
        g.push(Gate::Measure { qubit: 0, clbit: 0 });
        g.push(Gate::Measure { qubit: 1, clbit: 1 });
        let t = identity_route(&g);
        let mut nm = NoiseModel::noiseless(2);
        nm.idle = Some(IdleNoise { p_amp: vec![0.25, 0.0], p_phase: vec![0.5, 0.5] });
        let c = run_shots(&t, &nm, 20_000, 3).unwrap();
        let frac = c.get("10") as f64 / 20_000.0;
        assert!((frac - 0.25).abs() < 0.02, "{frac}");
    }

    #[test]
    fn exact_distribution_sums_to_one() {
        let g = build_circuit(&CircuitSpec::new(3, 1, Topology::Ring, 1).unwrap(), &[0.5, 1.5, 2.5], &[0.7; 6]).unwrap();
        let t = identity_route(&g);
        let mut nm = NoiseModel::noiseless(3);
        nm.p_ro = vec![0.1, 0.2, 0.0];
        let d = ideal_outcome_distribution(&t, &nm).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
