//! Per-backend compiled classifiers. Layout and routing depend only on the
//! circuit shape, so each client transpiles once and rebinds angles per call.

use thiserror::Error;

use crate::calib::BackendProfile;
use crate::qsim::{self, ClassProbs, NoiseModel, SimError};
use crate::train::Runner;
use crate::transpile::{self, TranspileError, TranspiledCircuit, TranspiledStats};
use crate::vqc::{build_circuit, CircuitError, CircuitSpec, Gate};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Transpile(#[from] TranspileError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A routed circuit template with the positions of its rotation gates.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub spec: CircuitSpec,
    pub template: TranspiledCircuit,
    slots: Vec<usize>,
}

impl CompiledModel {
    pub fn compile(spec: &CircuitSpec, profile: &BackendProfile) -> Result<Self, ExecError> {
        let g = build_circuit(spec, &vec![0.0; spec.num_qubits], &vec![0.0; spec.num_params()])?;
        let template = transpile::transpile(&g, profile)?;
        let slots: Vec<usize> = template
            .gates
            .gates
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.is_rotation().then_some(i))
            .collect();
        debug_assert_eq!(slots.len(), 2 * spec.num_qubits + spec.num_params());
        Ok(Self { spec: spec.clone(), template, slots })
    }

    pub fn stats(&self) -> TranspiledStats {
        transpile::stats(&self.template)
    }

    /// Routed circuit for input `x` and parameters `theta`.
    ///
    /// Rotation angles appear as `x_0, x_0, x_1, x_1, ...` (encoding) followed
    /// by `theta` in index order, matching `build_circuit`.
    pub fn bind(&self, x: &[f64], theta: &[f64]) -> Result<TranspiledCircuit, ExecError> {
        let q = self.spec.num_qubits;
        if x.len() != q {
            return Err(CircuitError::FeatureLength { got: x.len(), expected: q }.into());
        }
        if theta.len() != self.spec.num_params() {
            return Err(CircuitError::ParamLength { got: theta.len(), expected: self.spec.num_params() }.into());
        }
        let angles = x.iter().flat_map(|&v| [v, v]).chain(theta.iter().copied());
        let mut out = self.template.clone();
        for (&slot, angle) in self.slots.iter().zip(angles) {
            let g: &mut Gate = &mut out.gates.gates[slot];
            *g = g.with_angle(angle);
        }
        Ok(out)
    }
}

/// Executes a compiled model under one backend's noise model.
#[derive(Debug, Clone)]
pub struct BackendRunner {
    pub backend: String,
    pub model: CompiledModel,
    pub noise: NoiseModel,
}

impl BackendRunner {
    pub fn new(spec: &CircuitSpec, profile: &BackendProfile, idle_noise: bool) -> Result<Self, ExecError> {
        let model = CompiledModel::compile(spec, profile)?;
        let mut noise = NoiseModel::from_profile(profile);
        if idle_noise {
            noise = noise.with_idle(profile, model.stats().depth);
        }
        Ok(Self { backend: profile.name.clone(), model, noise })
    }

    /// Same circuit without any noise, for reference runs.
    pub fn noiseless(spec: &CircuitSpec, profile: &BackendProfile) -> Result<Self, ExecError> {
        let model = CompiledModel::compile(spec, profile)?;
        Ok(Self { backend: profile.name.clone(), model, noise: NoiseModel::noiseless(profile.num_qubits) })
    }
}

impl Runner for BackendRunner {
    fn class_probs(&self, x: &[f64], theta: &[f64], shots: u64, seed: u64) -> Result<ClassProbs, ExecError> {
        let circuit = self.model.bind(x, theta)?;
        let counts = qsim::run_shots(&circuit, &self.noise, shots, seed)?;
        Ok(qsim::class_probs(&counts)?)
    }
}
