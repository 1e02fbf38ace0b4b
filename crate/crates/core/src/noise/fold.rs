use crate::circuit::{Circuit, GateKind};

use super::NoiseError;

/// Digital noise amplification: each gate `G` becomes `G (G† G)^k` for
/// `factor = 2k + 1`.
///
/// `ecr`, `x` and `id` are self-inverse and `rz(θ)† = rz(−θ)`, so for those
/// the folded circuit has exactly `factor · |c|` gates. `sx†` has no single
/// native form and is emitted as `x · sx` (equal to `sx³`), which adds one
/// extra gate per fold of an `sx`.
pub fn fold_circuit(c: &Circuit, factor: usize) -> Result<Circuit, NoiseError> {
    if factor % 2 == 0 {
        return Err(NoiseError::EvenFoldFactor(factor));
    }
    if !c.is_native() {
        return Err(NoiseError::NotNative);
    }
    if factor == 1 {
        return Ok(c.clone());
    }
    let k = factor / 2;
    let mut out = Circuit::new(c.n_qubits);
    for g in &c.gates {
        out.push(g.kind, &g.qubits, g.angle);
        for _ in 0..k {
            match g.kind {
                GateKind::Sx => {
                    out.push(GateKind::X, &g.qubits, None);
                    out.push(GateKind::Sx, &g.qubits, None);
                }
                GateKind::Rz => out.push(GateKind::Rz, &g.qubits, g.angle.map(|a| -a)),
                _ => out.push(g.kind, &g.qubits, g.angle),
            }
            out.push(g.kind, &g.qubits, g.angle);
        }
    }
    out.measured = c.measured.clone();
    Ok(out)
}
