use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Circuit, CircuitError, GateKind};

pub const MAX_UNITARY_QUBITS: usize = 10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Gate matrix in little-endian order: for a two-qubit gate on `(a, b)`,
/// the local basis index is `bit_a + 2·bit_b`.
pub fn gate_matrix(kind: GateKind, angle: Option<f64>) -> DMatrix<Complex64> {
    let theta = angle.unwrap_or(0.0);
    match kind {
        GateKind::Id => DMatrix::identity(2, 2),
        GateKind::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        GateKind::Sx => {
            let a = Complex64::new(0.5, 0.5);
            let b = Complex64::new(0.5, -0.5);
            DMatrix::from_row_slice(2, 2, &[a, b, b, a])
        }
        GateKind::Rz => DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, Complex64::from_polar(1.0, theta / 2.0)],
        ),
        GateKind::Rx => {
            let c = Complex64::new((theta / 2.0).cos(), 0.0);
            let s = Complex64::new(0.0, -(theta / 2.0).sin());
            DMatrix::from_row_slice(2, 2, &[c, s, s, c])
        }
        GateKind::Ecr => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let one = ONE * r;
            let i = I * r;
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    ZERO, one, ZERO, i, //
                    one, ZERO, -i, ZERO, //
                    ZERO, i, ZERO, one, //
                    -i, ZERO, one, ZERO,
                ],
            )
        }
        GateKind::Rzz => {
            let m = Complex64::from_polar(1.0, -theta / 2.0);
            let p = Complex64::from_polar(1.0, theta / 2.0);
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![m, p, p, m]))
        }
    }
}

/// Applies a one- or two-qubit matrix to a state vector of `2^n` amplitudes.
pub(crate) fn apply_to_state(state: &mut [Complex64], m: &DMatrix<Complex64>, qubits: &[usize]) {
    match qubits {
        [q] => {
            let bit = 1usize << q;
            let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            for i in 0..state.len() {
                if i & bit == 0 {
                    let (a, b) = (state[i], state[i | bit]);
                    state[i] = m00 * a + m01 * b;
                    state[i | bit] = m10 * a + m11 * b;
                }
            }
        }
        [qa, qb] => {
            let (ba, bb) = (1usize << qa, 1usize << qb);
            for i in 0..state.len() {
                if i & (ba | bb) == 0 {
                    let idx = [i, i | ba, i | bb, i | ba | bb];
                    let v = idx.map(|k| state[k]);
                    for (r, &k) in idx.iter().enumerate() {
                        state[k] = (0..4).map(|c| m[(r, c)] * v[c]).sum();
                    }
                }
            }
        }
        _ => unreachable!("gates act on one or two qubits"),
    }
}

/// Dense unitary of the whole circuit, gates multiplied in time order.
pub fn circuit_unitary(c: &Circuit) -> Result<DMatrix<Complex64>, CircuitError> {
    if c.n_qubits > MAX_UNITARY_QUBITS {
        return Err(CircuitError::TooManyQubits(c.n_qubits));
    }
    c.validate()?;
    let dim = 1usize << c.n_qubits;
    let mats: Vec<_> = c.gates.iter().map(|g| gate_matrix(g.kind, g.angle)).collect();
    let mut u = DMatrix::<Complex64>::zeros(dim, dim);
    let mut col = vec![ZERO; dim];
    for j in 0..dim {
        col.iter_mut().for_each(|a| *a = ZERO);
        col[j] = ONE;
        for (g, m) in c.gates.iter().zip(&mats) {
            apply_to_state(&mut col, m, &g.qubits);
        }
        for (i, a) in col.iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

/// `max_ij |a_ij − e^{iφ} b_ij|` with `φ = arg tr(b† a)`, an upper bound on
/// the distance minimised over global phase.
pub fn phase_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}
