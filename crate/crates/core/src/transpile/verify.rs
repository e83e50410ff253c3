use crate::qsim::ideal_state;
use crate::vqc::GateList;

use super::{TranspileError, TranspiledCircuit};

/// Largest logical width accepted for dense verification.
pub const MAX_LOGICAL_QUBITS: usize = 10;
/// Largest routed width (logical plus ancillas crossed by SWAPs).
pub const MAX_ROUTED_QUBITS: usize = 20;

/// State fidelity between the logical circuit and the routed circuit after
/// undoing the routing relabeling. Measurements are ignored.
pub fn verify_equivalence(logical: &GateList, t: &TranspiledCircuit) -> Result<f64, TranspileError> {
    let q = logical.num_qubits;
    if q > MAX_LOGICAL_QUBITS {
        return Err(TranspileError::TooLargeForDense { qubits: q, limit: MAX_LOGICAL_QUBITS });
    }
    if t.final_layout.len() != q {
        return Err(TranspileError::InvalidLayout(format!(
            "routed circuit tracks {} logical qubits, expected {q}",
            t.final_layout.len()
        )));
    }
    let (dense, active) = t.compacted();
    if active.len() > MAX_ROUTED_QUBITS {
        return Err(TranspileError::TooLargeForDense { qubits: active.len(), limit: MAX_ROUTED_QUBITS });
    }
    let psi_logical = ideal_state(&logical.without_measurements());
    let psi_routed = ideal_state(&dense.without_measurements());

    let position: Vec<usize> = t
        .final_layout
        .iter()
        .map(|p| active.binary_search(p).expect("final layout qubits are active"))
        .collect();

    let mut overlap = num_complex::Complex64::new(0.0, 0.0);
    for (l, amp) in psi_logical.amplitudes().iter().enumerate() {
        let r = position
            .iter()
            .enumerate()
            .filter(|(j, _)| l >> j & 1 == 1)
            .fold(0usize, |acc, (_, &pos)| acc | 1 << pos);
        overlap += amp.conj() * psi_routed.amplitudes()[r];
    }
    Ok(overlap.norm_sqr().min(1.0))
}
