//! The shared variational classifier: angle encoding, layered RY/RZ ansatz
//! with a selectable entangling topology, CX folding and two-qubit readout.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("invalid circuit spec: {0}")]
    InvalidSpec(String),
    #[error("feature vector has length {got}, expected {expected}")]
    FeatureLength { got: usize, expected: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Linear,
    Ring,
    Full,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Linear, Topology::Ring, Topology::Full];
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Linear => "linear",
            Topology::Ring => "ring",
            Topology::Full => "full",
        })
    }
}

impl FromStr for Topology {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Topology::Linear),
            "ring" => Ok(Topology::Ring),
            "full" => Ok(Topology::Full),
            other => Err(CircuitError::InvalidSpec(format!("unknown topology {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub topology: Topology,
    pub cx_fold: usize,
    pub measured_qubits: (usize, usize),
}

impl CircuitSpec {
    pub fn new(num_qubits: usize, num_layers: usize, topology: Topology, cx_fold: usize) -> Result<Self, CircuitError> {
        let spec = Self { num_qubits, num_layers, topology, cx_fold, measured_qubits: (0, 1) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_measured(mut self, a: usize, b: usize) -> Result<Self, CircuitError> {
        self.measured_qubits = (a, b);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.num_qubits < 2 {
            return Err(CircuitError::InvalidSpec("at least 2 qubits required".into()));
        }
        if self.num_layers == 0 {
            return Err(CircuitError::InvalidSpec("at least 1 layer required".into()));
        }
        if self.cx_fold == 0 || self.cx_fold % 2 == 0 {
            return Err(CircuitError::InvalidSpec(format!("cx fold must be odd and positive, got {}", self.cx_fold)));
        }
        let (a, b) = self.measured_qubits;
        if a == b || a >= self.num_qubits || b >= self.num_qubits {
            return Err(CircuitError::InvalidSpec(format!("bad measured qubits ({a},{b})")));
        }
        Ok(())
    }

    /// Trainable parameter count, `2 * Q * L`.
    pub fn num_params(&self) -> usize {
        2 * self.num_qubits * self.num_layers
    }

    /// Flat index of the `m`-th (1-based) rotation angle of layer `layer` (1-based).
    pub fn param_index(&self, layer: usize, m: usize) -> usize {
        2 * self.num_qubits * (layer - 1) + m - 1
    }
}

/// Trainable angles, length `2QL`, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Cx { control: usize, target: usize },
    /// Full-width ordering fence.
    Barrier,
    Measure { qubit: usize, clbit: usize },
}

impl Gate {
    pub fn is_rotation(&self) -> bool {
        matches!(self, Gate::Ry { .. } | Gate::Rz { .. })
    }

    pub fn with_angle(self, value: f64) -> Self {
        match self {
            Gate::Ry { qubit, .. } => Gate::Ry { qubit, angle: value },
            Gate::Rz { qubit, .. } => Gate::Rz { qubit, angle: value },
            other => other,
        }
    }
}

/// An ordered gate sequence over `num_qubits` wires.
#[derive(Debug, Clone, PartialEq)]
pub struct GateList {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
}

impl GateList {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, gates: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate) {
        self.gates.push(gate);
    }

    pub fn without_measurements(&self) -> GateList {
        GateList {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().copied().filter(|g| !matches!(g, Gate::Measure { .. })).collect(),
        }
    }

    pub fn measurements(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.gates.iter().filter_map(|g| match *g {
            Gate::Measure { qubit, clbit } => Some((qubit, clbit)),
            _ => None,
        })
    }
}

/// Ordered `(control, target)` pairs of one entangling block.
pub fn entangle_pairs(topology: Topology, num_qubits: usize) -> Vec<(usize, usize)> {
    let q = num_qubits;
    match topology {
        Topology::Linear => (0..q.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        Topology::Ring => {
            let mut pairs: Vec<_> = (0..q.saturating_sub(1)).map(|i| (i, i + 1)).collect();
            if q > 2 {
                pairs.push((q - 1, 0));
            }
            pairs
        }
        Topology::Full => (0..q).flat_map(|i| (i + 1..q).map(move |j| (i, j))).collect(),
    }
}

/// Build the concrete gate sequence for one input and one parameter vector.
pub fn build_circuit(spec: &CircuitSpec, x: &[f64], theta: &[f64]) -> Result<GateList, CircuitError> {
    spec.validate()?;
    let q = spec.num_qubits;
    if x.len() != q {
        return Err(CircuitError::FeatureLength { got: x.len(), expected: q });
    }
    if theta.len() != spec.num_params() {
        return Err(CircuitError::ParamLength { got: theta.len(), expected: spec.num_params() });
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=PI).contains(*v)) {
        log::warn!("encoded feature {v} lies outside [0, pi]");
    }

    let pairs = entangle_pairs(spec.topology, q);
    let mut g = GateList::new(q);
    for (j, &xj) in x.iter().enumerate() {
        g.push(Gate::Ry { qubit: j, angle: xj });
        g.push(Gate::Rz { qubit: j, angle: xj });
    }
    for layer in 1..=spec.num_layers {
        for j in 0..q {
            // 1-based qubit j+1 owns angles 2(j+1)-1 and 2(j+1)
            g.push(Gate::Ry { qubit: j, angle: theta[spec.param_index(layer, 2 * j + 1)] });
            g.push(Gate::Rz { qubit: j, angle: theta[spec.param_index(layer, 2 * j + 2)] });
        }
        for &(control, target) in &pairs {
            for rep in 0..spec.cx_fold {
                if rep > 0 {
                    g.push(Gate::Barrier);
                }
                g.push(Gate::Cx { control, target });
            }
        }
    }
    let (a, b) = spec.measured_qubits;
    g.push(Gate::Measure { qubit: a, clbit: 0 });
    g.push(Gate::Measure { qubit: b, clbit: 1 });
    Ok(g)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub n_1q: usize,
    pub n_2q: usize,
    pub n_meas: usize,
}

pub fn logical_gate_counts(g: &GateList) -> GateCounts {
    g.gates.iter().fold(GateCounts::default(), |mut c, gate| {
        match gate {
            Gate::Ry { .. } | Gate::Rz { .. } => c.n_1q += 1,
            Gate::Cx { .. } => c.n_2q += 1,
            Gate::Measure { .. } => c.n_meas += 1,
            Gate::Barrier => {}
        }
        c
    })
}
