use std::f64::consts::{FRAC_PI_2, PI};

use super::{Circuit, CircuitError, GateKind, Stage};

/// Lowers a logical circuit into the native `{ecr, sx, x, id, rz}` set.
///
/// * `rx(θ)` becomes `rz(π/2) · sx · rz(θ+π) · sx · rz(π/2)` (time order).
/// * `rzz(θ)` on `(a, b)` becomes `CX(a,b) · rz(θ)_b · CX(a,b)` with each CX
///   expanded to `rz(-π/2)_a, rz(π)_b, sx_b, rz(π)_b, ecr(a,b), x_a`.
///
/// Both lowerings hold up to a global phase. Native circuits pass through.
pub fn transpile(c: &Circuit) -> Result<Circuit, CircuitError> {
    c.validate()?;
    if c.stage == Stage::Native {
        return Ok(c.clone());
    }
    let mut out = Circuit::new(c.n_qubits);
    for g in &c.gates {
        match g.kind {
            GateKind::Rx => {
                let q = g.qubits[0];
                let theta = g.angle.expect("validated rx carries an angle");
                out.push(GateKind::Rz, &[q], Some(FRAC_PI_2));
                out.push(GateKind::Sx, &[q], None);
                out.push(GateKind::Rz, &[q], Some(theta + PI));
                out.push(GateKind::Sx, &[q], None);
                out.push(GateKind::Rz, &[q], Some(FRAC_PI_2));
            }
            GateKind::Rzz => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                let theta = g.angle.expect("validated rzz carries an angle");
                push_cx(&mut out, a, b);
                out.push(GateKind::Rz, &[b], Some(theta));
                push_cx(&mut out, a, b);
            }
            kind if kind.is_native() => out.push(kind, &g.qubits, g.angle),
            kind => return Err(CircuitError::Unsupported(kind)),
        }
    }
    out.measured = c.measured.clone();
    out.stage = Stage::Native;
    out.renumber();
    Ok(out)
}

fn push_cx(out: &mut Circuit, control: usize, target: usize) {
    out.push(GateKind::Rz, &[control], Some(-FRAC_PI_2));
    out.push(GateKind::Rz, &[target], Some(PI));
    out.push(GateKind::Sx, &[target], None);
    out.push(GateKind::Rz, &[target], Some(PI));
    out.push(GateKind::Ecr, &[control, target], None);
    out.push(GateKind::X, &[control], None);
}
