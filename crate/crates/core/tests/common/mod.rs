#![allow(dead_code)]

use std::collections::BTreeMap;

use qagt::circuit::{Basis, Circuit, GateKind};
use qagt::model::{prepare_circuit, ModelConfig, PreparedCircuit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random native circuit with `n_gates` gates on `n_qubits` wires and a
/// measurement on every wire.
pub fn random_native(n_qubits: usize, n_gates: usize, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(n_qubits);
    for _ in 0..n_gates {
        let kind = GateKind::NATIVE[rng.random_range(0..5)];
        if kind == GateKind::Ecr && n_qubits < 2 {
            c.push(GateKind::Sx, &[rng.random_range(0..n_qubits)], None);
            continue;
        }
        match kind {
            GateKind::Ecr => {
                let a = rng.random_range(0..n_qubits);
                let mut b = rng.random_range(0..n_qubits - 1);
                if b >= a {
                    b += 1;
                }
                c.push(kind, &[a, b], None);
            }
            GateKind::Rz => c.push(kind, &[rng.random_range(0..n_qubits)], Some(rng.random_range(-3.0..3.0))),
            _ => c.push(kind, &[rng.random_range(0..n_qubits)], None),
        }
    }
    for q in 0..n_qubits {
        let basis = [Basis::X, Basis::Y, Basis::Z][rng.random_range(0..3)];
        c.measure(q, basis);
    }
    c
}

/// Prepared input for `c` with made-up noisy values.
pub fn prepared(c: &Circuit, id: usize) -> PreparedCircuit {
    let noisy: BTreeMap<usize, f64> = c.measured_qubits().iter().map(|&q| (q, 0.1 * q as f64 - 0.2)).collect();
    prepare_circuit(id, c, &noisy).unwrap()
}

/// A small model sized for `x`.
pub fn small_config(x: &PreparedCircuit) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: 3,
        d_ff: 12,
        mlp_hidden: vec![10, 6],
        descriptor_dim: x.descriptors[0].len(),
        ..ModelConfig::default()
    }
}
