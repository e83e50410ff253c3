use crate::calib::BackendProfile;
use crate::vqc::{Gate, GateList};

use super::{Layout, TranspileError, TranspiledCircuit};

/// Route a logical circuit onto the coupling map of `profile`.
///
/// Non-adjacent CX gates are preceded by SWAPs that walk the control along a
/// breadth-first shortest path toward the target. SWAPs are never undone;
/// later gates and measurements follow the moved qubits instead.
pub fn route(g: &GateList, layout: &Layout, profile: &BackendProfile) -> Result<TranspiledCircuit, TranspileError> {
    layout.validate(profile)?;
    if layout.logical_to_physical.len() != g.num_qubits {
        return Err(TranspileError::InvalidLayout(format!(
            "layout covers {} qubits, circuit has {}",
            layout.logical_to_physical.len(),
            g.num_qubits
        )));
    }
    let coupling = &profile.coupling;
    let mut log_to_phys = layout.logical_to_physical.clone();
    let mut phys_to_log: Vec<Option<usize>> = vec![None; profile.num_qubits];
    for (l, &p) in log_to_phys.iter().enumerate() {
        phys_to_log[p] = Some(l);
    }

    let mut out = GateList::new(profile.num_qubits);
    for gate in &g.gates {
        match *gate {
            Gate::Ry { qubit, angle } => out.push(Gate::Ry { qubit: log_to_phys[qubit], angle }),
            Gate::Rz { qubit, angle } => out.push(Gate::Rz { qubit: log_to_phys[qubit], angle }),
            Gate::Measure { qubit, clbit } => out.push(Gate::Measure { qubit: log_to_phys[qubit], clbit }),
            Gate::Barrier => out.push(Gate::Barrier),
            Gate::Cx { control, target } => {
                let (pc, pt) = (log_to_phys[control], log_to_phys[target]);
                if !coupling.are_adjacent(pc, pt) {
                    let path = coupling
                        .shortest_path(pc, pt)
                        .ok_or_else(|| TranspileError::Disconnected(profile.name.clone()))?;
                    for hop in path.windows(2).take(path.len() - 2) {
                        let (a, b) = (hop[0], hop[1]);
                        out.push(Gate::Cx { control: a, target: b });
                        out.push(Gate::Cx { control: b, target: a });
                        out.push(Gate::Cx { control: a, target: b });
                        let (la, lb) = (phys_to_log[a], phys_to_log[b]);
                        phys_to_log[a] = lb;
                        phys_to_log[b] = la;
                        if let Some(l) = la {
                            log_to_phys[l] = b;
                        }
                        if let Some(l) = lb {
                            log_to_phys[l] = a;
                        }
                    }
                }
                out.push(Gate::Cx { control: log_to_phys[control], target: log_to_phys[target] });
            }
        }
    }
    Ok(TranspiledCircuit { gates: out, layout: layout.clone(), final_layout: log_to_phys })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{stats, transpile};
    use super::*;
    use crate::vqc::logical_gate_counts;

    fn single_cx(q: usize, c: usize, t: usize) -> GateList {
        GateList { num_qubits: q, gates: vec![Gate::Cx { control: c, target: t }] }
    }

    #[test]
    fn adjacent_gates_need_no_swaps() {
        let mut g = GateList::new(3);
        g.push(Gate::Cx { control: 0, target: 1 });
        g.push(Gate::Cx { control: 2, target: 1 });
        let t = route(&g, &Layout::identity(3), &line(3)).unwrap();
        assert_eq!(logical_gate_counts(&t.gates).n_2q, 2);
        assert_eq!(t.final_layout, vec![0, 1, 2]);
    }

    #[test]
    fn three_qubit_line_needs_one_swap() {
        let t = route(&single_cx(3, 0, 2), &Layout::identity(3), &line(3)).unwrap();
        assert_eq!(stats(&t).n_2q, 4);
        assert_eq!(
            t.gates.gates,
            vec![
                Gate::Cx { control: 0, target: 1 },
                Gate::Cx { control: 1, target: 0 },
                Gate::Cx { control: 0, target: 1 },
                Gate::Cx { control: 1, target: 2 },
            ]
        );
        assert_eq!(t.final_layout, vec![1, 0, 2]);
        assert_eq!(t.final_permutation().get(&1), Some(&0));
    }

    #[test]
    fn four_qubit_line_needs_two_swaps() {
        let t = route(&single_cx(4, 0, 3), &Layout::identity(4), &line(4)).unwrap();
        assert_eq!(stats(&t).n_2q, 7);
    }

    #[test]
    fn routed_cx_lie_on_edges() {
        use crate::vqc::{build_circuit, CircuitSpec, Topology};
        let edges = [(0, 2), (1, 2), (2, 3), (3, 4), (4, 5)];
        let p = profile("tee", 6, &edges, |a, b| 0.01 + 0.001 * (a + b) as f64);
        let s = CircuitSpec::new(4, 2, Topology::Full, 3).unwrap();
        let g = build_circuit(&s, &[0.1; 4], &[0.2; 16]).unwrap();
        let t = transpile(&g, &p).unwrap();
        for gate in &t.gates.gates {
            if let Gate::Cx { control, target } = *gate {
                assert!(p.coupling.are_adjacent(control, target));
            }
        }
        assert!(stats(&t).n_2q > logical_gate_counts(&g).n_2q);
        assert_eq!(stats(&t).n_meas, 2);
        assert_eq!(stats(&t).n_1q, logical_gate_counts(&g).n_1q);
    }

    #[test]
    fn rejects_mismatched_layout() {
        let g = single_cx(3, 0, 2);
        assert!(route(&g, &Layout::identity(2), &line(3)).is_err());
        let dup = Layout { logical_to_physical: vec![0, 0, 1] };
        assert!(route(&g, &dup, &line(3)).is_err());
    }
}
