//! Circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered list of [`GateInstance`]s over `n_qubits`
//! wires plus the measured qubits and their bases. Circuits come from the
//! OpenQASM subset parser ([`parse_circuit`]), the TFIM generator
//! ([`generate_tfim`]) or the transpiler ([`transpile`]).

mod json;
mod parse;
mod tfim;
mod transpile;
mod unitary;

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use json::CanonicalCircuit;
pub use parse::{parse_circuit, to_qasm, ParseError};
pub use tfim::{generate_tfim, TfimConfig};
pub use transpile::transpile;
pub use unitary::{circuit_unitary, gate_matrix, phase_distance, MAX_UNITARY_QUBITS};
pub(crate) use unitary::apply_to_state;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("gate {id}: qubit index {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { id: usize, qubit: usize, n_qubits: usize },
    #[error("gate {id}: repeated qubit {qubit}")]
    RepeatedQubit { id: usize, qubit: usize },
    #[error("gate {id}: {kind} expects {expected} qubit(s), got {got}")]
    Arity { id: usize, kind: GateKind, expected: usize, got: usize },
    #[error("gate {id}: {kind} angle presence mismatch")]
    AngleMismatch { id: usize, kind: GateKind },
    #[error("gate {id}: non-finite angle")]
    NonFiniteAngle { id: usize },
    #[error("duplicate gate id {0}")]
    DuplicateId(usize),
    #[error("time_index not strictly increasing at gate {0}")]
    TimeOrder(usize),
    #[error("qubit {0} measured more than once")]
    DuplicateMeasurement(usize),
    #[error("measured qubit {qubit} out of range for {n_qubits} qubits")]
    MeasuredOutOfRange { qubit: usize, n_qubits: usize },
    #[error("circuit must have at least one qubit")]
    NoQubits,
    #[error("logical gate {0} in a circuit marked native")]
    LogicalInNative(GateKind),
    #[error("invalid TFIM config: {0}")]
    InvalidTfim(String),
    #[error("too many qubits for a dense unitary: {0} > {max}", max = MAX_UNITARY_QUBITS)]
    TooManyQubits(usize),
    #[error("unsupported logical gate {0}")]
    Unsupported(GateKind),
}

/// Gate kinds: the hardware-native set plus the logical `rx`/`rzz` used
/// before transpilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Ecr,
    Sx,
    X,
    Id,
    Rz,
    Rx,
    Rzz,
}

impl GateKind {
    /// Native kinds in feature order.
    pub const NATIVE: [GateKind; 5] = [
        GateKind::Ecr,
        GateKind::Sx,
        GateKind::X,
        GateKind::Id,
        GateKind::Rz,
    ];

    pub fn is_native(self) -> bool {
        !matches!(self, GateKind::Rx | GateKind::Rzz)
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Ecr | GateKind::Rzz => 2,
            _ => 1,
        }
    }

    pub fn is_parameterized(self) -> bool {
        matches!(self, GateKind::Rz | GateKind::Rx | GateKind::Rzz)
    }

    /// Position in [`GateKind::NATIVE`], `None` for logical kinds.
    pub fn native_index(self) -> Option<usize> {
        GateKind::NATIVE.iter().position(|&k| k == self)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Ecr => "ecr",
            GateKind::Sx => "sx",
            GateKind::X => "x",
            GateKind::Id => "id",
            GateKind::Rz => "rz",
            GateKind::Rx => "rx",
            GateKind::Rzz => "rzz",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "ecr" => GateKind::Ecr,
            "sx" => GateKind::Sx,
            "x" => GateKind::X,
            "id" => GateKind::Id,
            "rz" => GateKind::Rz,
            "rx" => GateKind::Rx,
            "rzz" => GateKind::Rzz,
            _ => return None,
        })
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Measurement basis of a measured qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    /// Index into the (X, Y, Z) one-hot block.
    pub fn index(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
            Basis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Logical,
    Native,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateInstance {
    pub id: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: Option<f64>,
    pub time_index: usize,
}

impl GateInstance {
    pub fn touches(&self, qubit: usize) -> bool {
        self.qubits.contains(&qubit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub qubit: usize,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<GateInstance>,
    pub measured: Vec<Measurement>,
    pub stage: Stage,
}

/// Reduces an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            measured: Vec::new(),
            stage: Stage::Native,
        }
    }

    /// Appends a gate with the next id and time index. Angles are
    /// normalized into `[0, 2π)`; the stage is downgraded to logical when a
    /// logical kind is pushed.
    pub fn push(&mut self, kind: GateKind, qubits: &[usize], angle: Option<f64>) {
        let next = self.gates.len();
        if !kind.is_native() {
            self.stage = Stage::Logical;
        }
        self.gates.push(GateInstance {
            id: next,
            kind,
            qubits: qubits.to_vec(),
            angle: angle.map(normalize_angle),
            time_index: next,
        });
    }

    pub fn measure(&mut self, qubit: usize, basis: Basis) {
        self.measured.push(Measurement { qubit, basis });
    }

    pub fn measured_qubits(&self) -> Vec<usize> {
        self.measured.iter().map(|m| m.qubit).collect()
    }

    pub fn is_native(&self) -> bool {
        self.stage == Stage::Native
    }

    /// Checks every structural invariant of the IR.
    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.n_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        let mut ids = std::collections::HashSet::new();
        let mut last_time: Option<usize> = None;
        for g in &self.gates {
            if !ids.insert(g.id) {
                return Err(CircuitError::DuplicateId(g.id));
            }
            if let Some(t) = last_time {
                if g.time_index <= t {
                    return Err(CircuitError::TimeOrder(g.id));
                }
            }
            last_time = Some(g.time_index);
            if g.qubits.len() != g.kind.arity() {
                return Err(CircuitError::Arity {
                    id: g.id,
                    kind: g.kind,
                    expected: g.kind.arity(),
                    got: g.qubits.len(),
                });
            }
            for (i, &q) in g.qubits.iter().enumerate() {
                if q >= self.n_qubits {
                    return Err(CircuitError::QubitOutOfRange {
                        id: g.id,
                        qubit: q,
                        n_qubits: self.n_qubits,
                    });
                }
                if g.qubits[..i].contains(&q) {
                    return Err(CircuitError::RepeatedQubit { id: g.id, qubit: q });
                }
            }
            if g.angle.is_some() != g.kind.is_parameterized() {
                return Err(CircuitError::AngleMismatch { id: g.id, kind: g.kind });
            }
            if matches!(g.angle, Some(a) if !a.is_finite()) {
                return Err(CircuitError::NonFiniteAngle { id: g.id });
            }
            if self.stage == Stage::Native && !g.kind.is_native() {
                return Err(CircuitError::LogicalInNative(g.kind));
            }
        }
        for (i, m) in self.measured.iter().enumerate() {
            if m.qubit >= self.n_qubits {
                return Err(CircuitError::MeasuredOutOfRange {
                    qubit: m.qubit,
                    n_qubits: self.n_qubits,
                });
            }
            if self.measured[..i].iter().any(|o| o.qubit == m.qubit) {
                return Err(CircuitError::DuplicateMeasurement(m.qubit));
            }
        }
        Ok(())
    }

    /// Reassigns ids and time indices to `0..len`.
    pub(crate) fn renumber(&mut self) {
        for (i, g) in self.gates.iter_mut().enumerate() {
            g.id = i;
            g.time_index = i;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_wraps_negative_angles() {
        assert_eq!(normalize_angle(0.0), 0.0);
        assert!((normalize_angle(-std::f64::consts::FRAC_PI_2) - 1.5 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!(normalize_angle(-1e-300) < TAU);
    }

    #[test]
    fn validate_catches_bad_gates() {
        let mut c = Circuit::new(2);
        c.push(GateKind::Ecr, &[0, 0], None);
        assert!(matches!(c.validate(), Err(CircuitError::RepeatedQubit { .. })));

        let mut c = Circuit::new(2);
        c.push(GateKind::X, &[2], None);
        assert!(matches!(c.validate(), Err(CircuitError::QubitOutOfRange { .. })));

        let mut c = Circuit::new(1);
        c.measure(0, Basis::Z);
        c.measure(0, Basis::X);
        assert_eq!(c.validate(), Err(CircuitError::DuplicateMeasurement(0)));
    }

    #[test]
    fn logical_push_downgrades_stage() {
        let mut c = Circuit::new(1);
        c.push(GateKind::Rz, &[0], Some(1.0));
        assert!(c.is_native());
        c.push(GateKind::Rx, &[0], Some(1.0));
        assert_eq!(c.stage, Stage::Logical);
    }
}
