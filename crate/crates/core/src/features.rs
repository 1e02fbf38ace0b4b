//! Circuit-level descriptor vectors: normalized gate-kind counts, a histogram
//! of rz angles, one qubit's noisy expectation value, its measurement basis
//! and its position among the measured qubits.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::circuit::{Circuit, GateKind};

pub const N_GATE_KINDS: usize = 5;
pub const N_ANGLE_BINS: usize = 80;
pub const BIN_WIDTH: f64 = 0.025 * PI;
/// Length of the descriptor without the qubit one-hot block.
pub const DESCRIPTOR_BASE_LEN: usize = N_GATE_KINDS + N_ANGLE_BINS + 1 + 3;

pub fn descriptor_len(n_measured: usize) -> usize {
    DESCRIPTOR_BASE_LEN + n_measured
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("descriptor needs a native circuit")]
    NotNative,
    #[error("non-finite rz angle at gate {0}")]
    NonFiniteAngle(usize),
    #[error("qubit {0} is not measured")]
    NotMeasured(usize),
    #[error("no noisy value for qubit {0}")]
    MissingNoisy(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    pub gate_counts: [f64; N_GATE_KINDS],
    pub angle_hist: Vec<f64>,
    pub noisy_value: f64,
    /// Order X, Y, Z.
    pub basis_onehot: [f64; 3],
    pub qubit_onehot: Vec<f64>,
}

impl DescriptorVector {
    pub fn len(&self) -> usize {
        descriptor_len(self.qubit_onehot.len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.gate_counts);
        v.extend_from_slice(&self.angle_hist);
        v.push(self.noisy_value);
        v.extend_from_slice(&self.basis_onehot);
        v.extend_from_slice(&self.qubit_onehot);
        v
    }
}

/// Fraction of gates of each native kind, ordered (ecr, sx, x, id, rz).
pub fn gate_count_features(c: &Circuit) -> [f64; N_GATE_KINDS] {
    let mut counts = [0.0; N_GATE_KINDS];
    for g in &c.gates {
        if let Some(i) = g.kind.native_index() {
            counts[i] += 1.0;
        }
    }
    let total = c.gates.len() as f64;
    if total > 0.0 {
        counts.iter_mut().for_each(|x| *x /= total);
    }
    counts
}

/// Normalized histogram of rz angles in bins of width 0.025π over [0, 2π).
pub fn angle_histogram(c: &Circuit) -> Result<Vec<f64>, FeatureError> {
    let mut hist = vec![0.0; N_ANGLE_BINS];
    let mut n = 0usize;
    for g in c.gates.iter().filter(|g| g.kind == GateKind::Rz) {
        let theta = g.angle.unwrap_or(0.0);
        if !theta.is_finite() {
            return Err(FeatureError::NonFiniteAngle(g.id));
        }
        let bin = ((theta / BIN_WIDTH).floor().max(0.0) as usize).min(N_ANGLE_BINS - 1);
        hist[bin] += 1.0;
        n += 1;
    }
    if n > 0 {
        hist.iter_mut().for_each(|x| *x /= n as f64);
    }
    Ok(hist)
}

/// Descriptor of `qubit`; `measured` fixes the qubit one-hot layout.
pub fn assemble_descriptor(
    c: &Circuit,
    qubit: usize,
    noisy: &BTreeMap<usize, f64>,
    measured: &[usize],
) -> Result<DescriptorVector, FeatureError> {
    if !c.is_native() {
        return Err(FeatureError::NotNative);
    }
    let pos = measured.iter().position(|&q| q == qubit).ok_or(FeatureError::NotMeasured(qubit))?;
    let basis = c
        .measured
        .iter()
        .find(|m| m.qubit == qubit)
        .map(|m| m.basis)
        .ok_or(FeatureError::NotMeasured(qubit))?;
    let noisy_value = *noisy.get(&qubit).ok_or(FeatureError::MissingNoisy(qubit))?;
    let mut basis_onehot = [0.0; 3];
    basis_onehot[basis.index()] = 1.0;
    let mut qubit_onehot = vec![0.0; measured.len()];
    qubit_onehot[pos] = 1.0;
    Ok(DescriptorVector {
        gate_counts: gate_count_features(c),
        angle_hist: angle_histogram(c)?,
        noisy_value: noisy_value.clamp(-1.0, 1.0),
        basis_onehot,
        qubit_onehot,
    })
}

/// Descriptors of every measured qubit, in measurement order.
pub fn circuit_descriptors(
    c: &Circuit,
    noisy: &BTreeMap<usize, f64>,
) -> Result<BTreeMap<usize, Vec<f64>>, FeatureError> {
    let measured = c.measured_qubits();
    measured
        .iter()
        .map(|&q| assemble_descriptor(c, q, noisy, &measured).map(|d| (q, d.to_vec())))
        .collect()
}
