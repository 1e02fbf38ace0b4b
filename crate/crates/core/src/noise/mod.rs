//! Density-matrix simulation under depolarizing noise, noise amplification
//! (analog scaling and digital folding), zero-noise extrapolation and
//! labeled dataset construction.

mod dataset;
mod density;
mod fold;
mod shots;
mod zne;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{gate_matrix, Circuit, CircuitError, Measurement};

pub use dataset::{
    build_dataset, read_dataset, write_dataset, DatasetConfig, QubitValues, Range, Sample, ScalingMethod,
};
pub use density::DensityMatrix;
pub use fold::fold_circuit;
pub use shots::sample_shots;
pub use zne::{zne_extrapolate, Extrapolation};

/// Largest register the dense simulator accepts.
pub const MAX_SIM_QUBITS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("circuit is not in the native gate set")]
    NotNative,
    #[error("{0} qubits exceeds the simulator limit of {MAX_SIM_QUBITS}")]
    TooManyQubits(usize),
    #[error("invalid noise model: {0}")]
    InvalidModel(String),
    #[error("noise scale must be finite and >= 1, got {0}")]
    InvalidScale(f64),
    #[error("scaled two-qubit error probability {0} exceeds 1")]
    ScaledProbability(f64),
    #[error("folding factor must be odd, got {0}")]
    EvenFoldFactor(usize),
    #[error("extrapolation needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("duplicate noise scale {0} in extrapolation points")]
    DuplicateScale(f64),
    #[error("invalid extrapolation point ({0}, {1})")]
    InvalidPoint(f64, f64),
    #[error("shots must be at least 1")]
    NoShots,
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Depolarizing error rates plus a symmetric readout flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    #[serde(default)]
    pub readout_flip: f64,
}

impl NoiseModel {
    pub const NOISELESS: NoiseModel = NoiseModel { p1: 0.0, p2: 0.0, readout_flip: 0.0 };

    pub fn new(p1: f64, p2: f64, readout_flip: f64) -> Result<Self, NoiseError> {
        let m = NoiseModel { p1, p2, readout_flip };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if !unit(self.p1) || !unit(self.p2) {
            return Err(NoiseError::InvalidModel(format!(
                "depolarizing probabilities must lie in [0, 1], got p1={} p2={}",
                self.p1, self.p2
            )));
        }
        if !(0.0..=0.5).contains(&self.readout_flip) {
            return Err(NoiseError::InvalidModel(format!(
                "readout flip must lie in [0, 0.5], got {}",
                self.readout_flip
            )));
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { p1: 0.001, p2: 0.01, readout_flip: 0.0 }
    }
}

/// Analog noise amplification factor `λ ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoiseScale(f64);

impl NoiseScale {
    pub const UNIT: NoiseScale = NoiseScale(1.0);

    pub fn new(factor: f64) -> Result<Self, NoiseError> {
        if factor.is_finite() && factor >= 1.0 {
            Ok(NoiseScale(factor))
        } else {
            Err(NoiseError::InvalidScale(factor))
        }
    }

    pub fn factor(self) -> f64 {
        self.0
    }
}

/// Expectation value per measured qubit.
pub type Expectations = BTreeMap<usize, f64>;

/// Exact expectation values of `observables` after running `c` under
/// `noise` amplified by `scale`.
///
/// Every gate is followed by a depolarizing channel on its support with
/// probability `min(1, λ·p1)` or `λ·p2` by arity; the readout flip then
/// shrinks each value by `1 − 2·readout_flip`.
pub fn simulate(
    c: &Circuit,
    noise: &NoiseModel,
    scale: NoiseScale,
    observables: &[Measurement],
) -> Result<Expectations, NoiseError> {
    simulate_observed(c, noise, scale, observables, |_, _| {})
}

/// [`simulate`] with a callback after every gate + channel step, receiving
/// the gate position and the current state.
pub fn simulate_observed(
    c: &Circuit,
    noise: &NoiseModel,
    scale: NoiseScale,
    observables: &[Measurement],
    mut observe: impl FnMut(usize, &DensityMatrix),
) -> Result<Expectations, NoiseError> {
    noise.validate()?;
    if !c.is_native() {
        return Err(NoiseError::NotNative);
    }
    if c.n_qubits > MAX_SIM_QUBITS {
        return Err(NoiseError::TooManyQubits(c.n_qubits));
    }
    c.validate()?;
    let lambda = scale.factor();
    let p2 = lambda * noise.p2;
    if p2 > 1.0 {
        return Err(NoiseError::ScaledProbability(p2));
    }
    let p1 = (lambda * noise.p1).min(1.0);
    let mut rho = DensityMatrix::zero_state(c.n_qubits);
    for (pos, g) in c.gates.iter().enumerate() {
        rho.apply_unitary(&gate_matrix(g.kind, g.angle), &g.qubits);
        let p = if g.qubits.len() == 2 { p2 } else { p1 };
        rho.depolarize(&g.qubits, p);
        observe(pos, &rho);
    }
    let shrink = 1.0 - 2.0 * noise.readout_flip;
    Ok(observables
        .iter()
        .map(|m| (m.qubit, (shrink * rho.expectation(m.qubit, m.basis)).clamp(-1.0, 1.0)))
        .collect())
}

/// Noiseless expectation values via state-vector simulation.
pub fn simulate_exact(c: &Circuit, observables: &[Measurement]) -> Result<Expectations, NoiseError> {
    if c.n_qubits > MAX_SIM_QUBITS {
        return Err(NoiseError::TooManyQubits(c.n_qubits));
    }
    c.validate()?;
    let psi = density::statevector(c);
    Ok(observables
        .iter()
        .map(|m| (m.qubit, density::statevector_expectation(&psi, m.qubit, m.basis).clamp(-1.0, 1.0)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_tfim, transpile, Basis, GateKind, TfimConfig};

    fn z0() -> Vec<Measurement> {
        vec![Measurement { qubit: 0, basis: Basis::Z }]
    }

    #[test]
    fn noiseless_x_flips() {
        let mut c = Circuit::new(1);
        c.push(GateKind::X, &[0], None);
        for lambda in [1.0, 2.5] {
            let e = simulate(&c, &NoiseModel::NOISELESS, NoiseScale::new(lambda).unwrap(), &z0()).unwrap();
            assert_eq!(e[&0], -1.0);
        }
    }

    #[test]
    fn empty_circuit_measures_plus_one() {
        let e = simulate(&Circuit::new(1), &NoiseModel::NOISELESS, NoiseScale::UNIT, &z0()).unwrap();
        assert_eq!(e[&0], 1.0);
    }

    #[test]
    fn depolarized_x() {
        let mut c = Circuit::new(1);
        c.push(GateKind::X, &[0], None);
        let noise = NoiseModel::new(0.1, 0.0, 0.0).unwrap();
        let e = simulate(&c, &noise, NoiseScale::UNIT, &z0()).unwrap();
        assert!((e[&0] + 0.9).abs() < 1e-15);
    }

    #[test]
    fn readout_flip_shrinks() {
        let noise = NoiseModel::new(0.0, 0.0, 0.1).unwrap();
        let e = simulate(&Circuit::new(1), &noise, NoiseScale::UNIT, &z0()).unwrap();
        assert!((e[&0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut logical = Circuit::new(2);
        logical.push(GateKind::Rzz, &[0, 1], Some(0.1));
        assert_eq!(
            simulate(&logical, &NoiseModel::NOISELESS, NoiseScale::UNIT, &z0()),
            Err(NoiseError::NotNative)
        );
        let noise = NoiseModel::new(0.0, 0.4, 0.0).unwrap();
        assert!(matches!(
            simulate(&Circuit::new(2), &noise, NoiseScale::new(3.0).unwrap(), &z0()),
            Err(NoiseError::ScaledProbability(_))
        ));
        assert!(NoiseScale::new(0.5).is_err());
        assert!(NoiseModel::new(0.0, 0.0, 0.6).is_err());
        assert!(matches!(
            simulate(&Circuit::new(11), &NoiseModel::NOISELESS, NoiseScale::UNIT, &[]),
            Err(NoiseError::TooManyQubits(11))
        ));
    }

    #[test]
    fn state_stays_physical_on_tfim() {
        let c = transpile(&generate_tfim(&TfimConfig::new(3, 2, 1.0, 0.7, 0.2), 0).unwrap()).unwrap();
        let noise = NoiseModel::new(0.02, 0.05, 0.0).unwrap();
        let mut checked = 0;
        simulate_observed(&c, &noise, NoiseScale::new(2.0).unwrap(), &c.measured, |_, rho| {
            assert!((rho.trace().re - 1.0).abs() < 1e-9);
            assert!(rho.trace().im.abs() < 1e-9);
            assert!(rho.hermiticity_error() < 1e-12);
            assert!(rho.min_eigenvalue() > -1e-9);
            checked += 1;
        })
        .unwrap();
        assert_eq!(checked, c.gates.len());
    }

    #[test]
    fn noise_response_is_monotone_on_tfim() {
        let c = transpile(&generate_tfim(&TfimConfig::new(4, 3, 1.0, 0.4, 0.1), 0).unwrap()).unwrap();
        let noise = NoiseModel::default();
        let mut prev: Option<Expectations> = None;
        for lambda in [1.0, 1.5, 2.0, 3.0, 5.0] {
            let e = simulate(&c, &noise, NoiseScale::new(lambda).unwrap(), &c.measured).unwrap();
            if let Some(p) = &prev {
                for (q, v) in &e {
                    assert!(p[q].abs() >= v.abs() - 1e-9, "q{q} λ={lambda}");
                }
            }
            prev = Some(e);
        }
    }

    #[test]
    fn exact_matches_noiseless_density() {
        let c = transpile(&generate_tfim(&TfimConfig::new(3, 3, 0.9, 1.2, 0.15), 0).unwrap()).unwrap();
        let a = simulate(&c, &NoiseModel::NOISELESS, NoiseScale::UNIT, &c.measured).unwrap();
        let b = simulate_exact(&c, &c.measured).unwrap();
        for q in 0..3 {
            assert!((a[&q] - b[&q]).abs() < 1e-12);
        }
    }
}
