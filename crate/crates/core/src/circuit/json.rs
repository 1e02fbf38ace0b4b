use serde::{Deserialize, Serialize};

use super::{Basis, Circuit, CircuitError, GateInstance, GateKind, Measurement, Stage};

/// Canonical on-disk form of a circuit. Field order is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalCircuit {
    pub version: u32,
    pub n_qubits: usize,
    pub stage: Stage,
    pub gates: Vec<CanonicalGate>,
    pub measured: Vec<CanonicalMeasurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalGate {
    pub id: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalMeasurement {
    pub qubit: usize,
    pub basis: Basis,
}

impl From<&Circuit> for CanonicalCircuit {
    fn from(c: &Circuit) -> Self {
        CanonicalCircuit {
            version: 1,
            n_qubits: c.n_qubits,
            stage: c.stage,
            gates: c
                .gates
                .iter()
                .map(|g| CanonicalGate { id: g.id, kind: g.kind, qubits: g.qubits.clone(), angle: g.angle })
                .collect(),
            measured: c
                .measured
                .iter()
                .map(|m| CanonicalMeasurement { qubit: m.qubit, basis: m.basis })
                .collect(),
        }
    }
}

impl TryFrom<CanonicalCircuit> for Circuit {
    type Error = CircuitError;

    /// Time indices are reconstructed from list position.
    fn try_from(c: CanonicalCircuit) -> Result<Self, Self::Error> {
        let circuit = Circuit {
            n_qubits: c.n_qubits,
            stage: c.stage,
            gates: c
                .gates
                .into_iter()
                .enumerate()
                .map(|(t, g)| GateInstance { id: g.id, kind: g.kind, qubits: g.qubits, angle: g.angle, time_index: t })
                .collect(),
            measured: c
                .measured
                .into_iter()
                .map(|m| Measurement { qubit: m.qubit, basis: m.basis })
                .collect(),
        };
        circuit.validate()?;
        Ok(circuit)
    }
}

impl Circuit {
    pub fn to_canonical(&self) -> CanonicalCircuit {
        CanonicalCircuit::from(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_canonical()).expect("canonical circuit serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_order_and_optional_angle() {
        let mut c = Circuit::new(2);
        c.push(GateKind::Rz, &[0], Some(0.5));
        c.push(GateKind::Ecr, &[0, 1], None);
        c.measure(1, Basis::X);
        let s = c.to_json();
        assert_eq!(
            s,
            r#"{"version":1,"n_qubits":2,"stage":"native","gates":[{"id":0,"kind":"rz","qubits":[0],"angle":0.5},{"id":1,"kind":"ecr","qubits":[0,1]}],"measured":[{"qubit":1,"basis":"X"}]}"#
        );
        let back: CanonicalCircuit = serde_json::from_str(&s).unwrap();
        assert_eq!(Circuit::try_from(back).unwrap(), c);
    }

    #[test]
    fn invalid_json_circuit_rejected() {
        let s = r#"{"version":1,"n_qubits":1,"stage":"native","gates":[{"id":0,"kind":"rx","qubits":[0],"angle":1.0}],"measured":[]}"#;
        let back: CanonicalCircuit = serde_json::from_str(s).unwrap();
        assert_eq!(Circuit::try_from(back), Err(CircuitError::LogicalInNative(GateKind::Rx)));
    }
}
