use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Basis, Circuit, CircuitError, GateKind};

/// First-order Trotterization of `H = -J Σ Z_i Z_{i+1} - h Σ X_i` on an
/// open 1D chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfimConfig {
    pub n_qubits: usize,
    pub trotter_steps: usize,
    pub coupling: f64,
    pub field: f64,
    pub dt: f64,
    /// Half-width of the uniform jitter added to every angle, in radians.
    /// Zero disables it.
    #[serde(default)]
    pub angle_jitter: f64,
}

impl TfimConfig {
    pub fn new(n_qubits: usize, trotter_steps: usize, coupling: f64, field: f64, dt: f64) -> Self {
        TfimConfig { n_qubits, trotter_steps, coupling, field, dt, angle_jitter: 0.0 }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let bad = |m: &str| Err(CircuitError::InvalidTfim(m.to_string()));
        if self.n_qubits == 0 {
            return bad("n_qubits must be positive");
        }
        if self.trotter_steps == 0 {
            return bad("trotter_steps must be at least 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive and finite");
        }
        if !self.coupling.is_finite() || !self.field.is_finite() {
            return bad("coupling and field must be finite");
        }
        if !(self.angle_jitter >= 0.0 && self.angle_jitter.is_finite()) {
            return bad("angle_jitter must be non-negative");
        }
        Ok(())
    }

    /// Logical gate count: `steps · (2n − 1)`.
    pub fn gate_count(&self) -> usize {
        self.trotter_steps * (2 * self.n_qubits - 1)
    }
}

/// Builds the logical-stage Trotter circuit: per step `rzz(2·J·dt)` on each
/// neighbouring pair in chain order, then `rx(2·h·dt)` on every qubit. All
/// qubits are measured in Z. `seed` only matters when jitter is enabled.
pub fn generate_tfim(cfg: &TfimConfig, seed: u64) -> Result<Circuit, CircuitError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |rng: &mut ChaCha8Rng| {
        if cfg.angle_jitter > 0.0 {
            rng.random_range(-cfg.angle_jitter..cfg.angle_jitter)
        } else {
            0.0
        }
    };
    let zz = 2.0 * cfg.coupling * cfg.dt;
    let x = 2.0 * cfg.field * cfg.dt;
    let mut c = Circuit::new(cfg.n_qubits);
    for _ in 0..cfg.trotter_steps {
        for i in 0..cfg.n_qubits.saturating_sub(1) {
            let a = zz + jitter(&mut rng);
            c.push(GateKind::Rzz, &[i, i + 1], Some(a));
        }
        for i in 0..cfg.n_qubits {
            let a = x + jitter(&mut rng);
            c.push(GateKind::Rx, &[i], Some(a));
        }
    }
    for i in 0..cfg.n_qubits {
        c.measure(i, Basis::Z);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Stage;

    #[test]
    fn two_qubits_one_step() {
        let c = generate_tfim(&TfimConfig::new(2, 1, 1.0, 0.5, 0.1), 0).unwrap();
        let kinds: Vec<_> = c.gates.iter().map(|g| (g.kind, g.qubits.clone())).collect();
        assert_eq!(
            kinds,
            vec![(GateKind::Rzz, vec![0, 1]), (GateKind::Rx, vec![0]), (GateKind::Rx, vec![1])]
        );
        assert_eq!(c.stage, Stage::Logical);
        assert!((c.gates[0].angle.unwrap() - 0.2).abs() < 1e-15);
        assert!((c.gates[1].angle.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn five_qubits_four_steps() {
        let cfg = TfimConfig::new(5, 4, 1.0, 1.0, 0.1);
        let c = generate_tfim(&cfg, 0).unwrap();
        assert_eq!(c.gates.len(), 36);
        assert_eq!(cfg.gate_count(), 36);
        assert_eq!(c.measured.len(), 5);
        c.validate().unwrap();
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(generate_tfim(&TfimConfig::new(3, 0, 1.0, 1.0, 0.1), 0).is_err());
        assert!(generate_tfim(&TfimConfig::new(3, 1, 1.0, 1.0, 0.0), 0).is_err());
    }

    #[test]
    fn jitter_is_seeded() {
        let mut cfg = TfimConfig::new(3, 2, 1.0, 1.0, 0.1);
        cfg.angle_jitter = 0.01;
        let a = generate_tfim(&cfg, 7).unwrap();
        let b = generate_tfim(&cfg, 7).unwrap();
        let c = generate_tfim(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
