//! Layout selection, SWAP routing onto a device coupling map, and the
//! transpiled-circuit statistics that feed the noise budget.
//!
//! There are no optimization passes: every logical gate survives, SWAPs are
//! expanded into three CX gates, and barriers are preserved in place.

mod route;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::BackendProfile;
use crate::vqc::{Gate, GateList};

pub use route::route;
pub use verify::verify_equivalence;

#[derive(Debug, Error, PartialEq)]
pub enum TranspileError {
    #[error("circuit needs {needed} qubits but backend {backend} has {available}")]
    TooManyQubits { needed: usize, available: usize, backend: String },
    #[error("coupling graph of {0} is disconnected")]
    Disconnected(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("{qubits} qubits exceeds the dense verification bound of {limit}")]
    TooLargeForDense { qubits: usize, limit: usize },
}

/// Injective map from logical to physical qubits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub logical_to_physical: Vec<usize>,
}

impl Layout {
    pub fn identity(q: usize) -> Self {
        Self { logical_to_physical: (0..q).collect() }
    }

    pub fn validate(&self, profile: &BackendProfile) -> Result<(), TranspileError> {
        let mut seen = vec![false; profile.num_qubits];
        for &p in &self.logical_to_physical {
            if p >= profile.num_qubits {
                return Err(TranspileError::InvalidLayout(format!("physical qubit {p} out of range")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(TranspileError::InvalidLayout(format!("physical qubit {p} used twice")));
            }
        }
        Ok(())
    }
}

/// Greedy low-error layout: seed on the best coupling edge, then keep adding
/// the outside neighbor reached through the lowest-error edge.
pub fn select_layout(profile: &BackendProfile, q: usize) -> Result<Layout, TranspileError> {
    if q > profile.num_qubits {
        return Err(TranspileError::TooManyQubits {
            needed: q,
            available: profile.num_qubits,
            backend: profile.name.clone(),
        });
    }
    if !profile.coupling.is_connected() {
        return Err(TranspileError::Disconnected(profile.name.clone()));
    }
    if q == 0 {
        return Ok(Layout { logical_to_physical: Vec::new() });
    }
    let edges = profile.coupling.edges();
    if edges.is_empty() {
        // single-qubit device
        return Ok(Layout::identity(q));
    }
    let key = |&(a, b): &(usize, usize)| (profile.edge_error(a, b).unwrap_or(1.0), (a, b));
    let cheapest = |candidates: &mut dyn Iterator<Item = (usize, usize)>| {
        candidates.min_by(|x, y| {
            let (ex, kx) = key(x);
            let (ey, ky) = key(y);
            ex.total_cmp(&ey).then(kx.cmp(&ky))
        })
    };

    let (a, b) = cheapest(&mut edges.iter().copied()).expect("non-empty edge list");
    let mut chosen = vec![a];
    let mut in_set = vec![false; profile.num_qubits];
    in_set[a] = true;
    if q > 1 {
        chosen.push(b);
        in_set[b] = true;
    }
    while chosen.len() < q {
        let mut frontier = edges.iter().copied().filter(|&(u, v)| in_set[u] != in_set[v]);
        let (u, v) = cheapest(&mut frontier).expect("connected graph always has a frontier edge");
        let next = if in_set[u] { v } else { u };
        in_set[next] = true;
        chosen.push(next);
    }
    Ok(Layout { logical_to_physical: chosen })
}

/// A routed circuit over physical qubit indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TranspiledCircuit {
    pub gates: GateList,
    pub layout: Layout,
    /// Physical position of each logical qubit after all inserted SWAPs.
    pub final_layout: Vec<usize>,
}

impl TranspiledCircuit {
    /// Physical -> logical relabeling induced by routing.
    pub fn final_permutation(&self) -> BTreeMap<usize, usize> {
        self.final_layout.iter().enumerate().map(|(logical, &phys)| (phys, logical)).collect()
    }

    /// Sorted physical qubits touched by any gate or holding a logical qubit.
    pub fn active_qubits(&self) -> Vec<usize> {
        let mut used = vec![false; self.gates.num_qubits];
        for &p in self.layout.logical_to_physical.iter().chain(&self.final_layout) {
            used[p] = true;
        }
        for g in &self.gates.gates {
            match *g {
                Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } | Gate::Measure { qubit, .. } => used[qubit] = true,
                Gate::Cx { control, target } => {
                    used[control] = true;
                    used[target] = true;
                }
                Gate::Barrier => {}
            }
        }
        used.iter().enumerate().filter_map(|(q, &u)| u.then_some(q)).collect()
    }

    /// Gate list relabeled onto dense indices `0..active.len()`, plus the
    /// physical index of each dense qubit.
    pub fn compacted(&self) -> (GateList, Vec<usize>) {
        let active = self.active_qubits();
        let mut dense = vec![usize::MAX; self.gates.num_qubits];
        for (i, &p) in active.iter().enumerate() {
            dense[p] = i;
        }
        let gates = self
            .gates
            .gates
            .iter()
            .map(|g| match *g {
                Gate::Ry { qubit, angle } => Gate::Ry { qubit: dense[qubit], angle },
                Gate::Rz { qubit, angle } => Gate::Rz { qubit: dense[qubit], angle },
                Gate::Cx { control, target } => Gate::Cx { control: dense[control], target: dense[target] },
                Gate::Measure { qubit, clbit } => Gate::Measure { qubit: dense[qubit], clbit },
                Gate::Barrier => Gate::Barrier,
            })
            .collect();
        (GateList { num_qubits: active.len(), gates }, active)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranspiledStats {
    pub depth: usize,
    pub n_1q: usize,
    pub n_2q: usize,
    pub n_meas: usize,
}

/// ASAP layering depth. Each gate takes one layer on every qubit it touches;
/// a barrier aligns all qubits to the current maximum.
pub fn circuit_depth(g: &GateList) -> usize {
    let mut frontier = vec![0usize; g.num_qubits];
    for gate in &g.gates {
        match *gate {
            Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } | Gate::Measure { qubit, .. } => frontier[qubit] += 1,
            Gate::Cx { control, target } => {
                let layer = frontier[control].max(frontier[target]) + 1;
                frontier[control] = layer;
                frontier[target] = layer;
            }
            Gate::Barrier => {
                let top = frontier.iter().copied().max().unwrap_or(0);
                frontier.iter_mut().for_each(|f| *f = top);
            }
        }
    }
    frontier.into_iter().max().unwrap_or(0)
}

pub fn stats(t: &TranspiledCircuit) -> TranspiledStats {
    let counts = crate::vqc::logical_gate_counts(&t.gates);
    TranspiledStats { depth: circuit_depth(&t.gates), n_1q: counts.n_1q, n_2q: counts.n_2q, n_meas: counts.n_meas }
}

/// Layout selection followed by routing.
pub fn transpile(g: &GateList, profile: &BackendProfile) -> Result<TranspiledCircuit, TranspileError> {
    let layout = select_layout(profile, g.num_qubits)?;
    route(g, &layout, profile)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn full_width_layout_is_permutation() {
        let p = line(5);
        let layout = select_layout(&p, 5).unwrap();
        let mut sorted = layout.logical_to_physical.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn uniform_line_gives_identity_prefix() {
        let layout = select_layout(&line(5), 3).unwrap();
        assert_eq!(layout.logical_to_physical, vec![0, 1, 2]);
    }

    #[test]
    fn star_seeds_on_cheapest_edge() {
        let edges = [(0, 2), (1, 2), (2, 3), (2, 4)];
        let p = profile("star", 5, &edges, |_, b| if b == 4 { 0.001 } else { 0.02 });
        assert_eq!(select_layout(&p, 2).unwrap().logical_to_physical, vec![2, 4]);
    }

    #[test]
    fn layout_errors() {
        assert!(matches!(select_layout(&line(3), 4), Err(TranspileError::TooManyQubits { .. })));
        let split = profile("split", 4, &[(0, 1), (2, 3)], |_, _| 0.01);
        assert!(matches!(select_layout(&split, 2), Err(TranspileError::Disconnected(_))));
    }

    #[test]
    fn depth_rules() {
        let mut g = GateList::new(4);
        g.push(Gate::Cx { control: 0, target: 1 });
        g.push(Gate::Cx { control: 2, target: 3 });
        assert_eq!(circuit_depth(&g), 1);
        let mut h = GateList::new(3);
        h.push(Gate::Cx { control: 0, target: 1 });
        h.push(Gate::Cx { control: 1, target: 2 });
        assert_eq!(circuit_depth(&h), 2);
    }

    #[test]
    fn barriers_separate_folded_cx() {
        use crate::vqc::{build_circuit, CircuitSpec, Topology};
        let s = CircuitSpec::new(2, 1, Topology::Linear, 3).unwrap();
        let g = build_circuit(&s, &[0.0; 2], &[0.0; 4]).unwrap();
        // 2 encoding + 2 layer rotations, 3 CX layers, 1 measurement layer
        assert_eq!(circuit_depth(&g), 8);
        let mut no_barrier = g.clone();
        no_barrier.gates.retain(|g| *g != Gate::Barrier);
        assert_eq!(circuit_depth(&no_barrier), 8);
        let mut g2 = GateList::new(3);
        g2.push(Gate::Ry { qubit: 2, angle: 0.0 });
        g2.push(Gate::Ry { qubit: 2, angle: 0.0 });
        g2.push(Gate::Barrier);
        g2.push(Gate::Ry { qubit: 0, angle: 0.0 });
        assert_eq!(circuit_depth(&g2), 3);
    }
}
