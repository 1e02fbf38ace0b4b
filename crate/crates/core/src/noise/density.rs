use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuit::{apply_to_state, gate_matrix, Basis};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense `2^n × 2^n` density matrix stored row-major.
///
/// With row-major storage the flat index is `row · 2^n + col`, so the
/// column bits are the low `n` bits and the row bits the high `n` bits.
/// Left-multiplying by a gate acts on bits `q + n`; right-multiplying by its
/// adjoint acts with the conjugate matrix on bits `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|0…0⟩⟨0…0|`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        data[0] = Complex64::new(1.0, 0.0);
        DensityMatrix { n_qubits, data }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    /// `ρ → U ρ U†` for a one- or two-qubit gate matrix.
    pub fn apply_unitary(&mut self, u: &DMatrix<Complex64>, qubits: &[usize]) {
        let n = self.n_qubits;
        let rows: Vec<usize> = qubits.iter().map(|q| q + n).collect();
        apply_to_state(&mut self.data, u, &rows);
        let conj = u.map(|z| z.conj());
        apply_to_state(&mut self.data, &conj, qubits);
    }

    /// Depolarizing channel on `support`:
    /// `ρ → (1−p) ρ + p · (I/2^k ⊗ Tr_support ρ)`.
    pub fn depolarize(&mut self, support: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let dim = self.dim();
        let k = support.len();
        let mask: usize = support.iter().map(|q| 1usize << q).sum();
        // offsets[s] spreads the k-bit pattern s onto the support bits
        let offsets: Vec<usize> = (0..1usize << k)
            .map(|s| {
                support
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| s >> b & 1 == 1)
                    .map(|(_, q)| 1usize << q)
                    .sum()
            })
            .collect();
        let keep = 1.0 - p;
        let mix = p / (1usize << k) as f64;
        for i in (0..dim).filter(|i| i & mask == 0) {
            for j in (0..dim).filter(|j| j & mask == 0) {
                let traced: Complex64 = offsets.iter().map(|&o| self.data[(i | o) * dim + (j | o)]).sum();
                for &oi in &offsets {
                    for &oj in &offsets {
                        let idx = (i | oi) * dim + (j | oj);
                        self.data[idx] *= keep;
                        if oi == oj {
                            self.data[idx] += traced * mix;
                        }
                    }
                }
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `max |ρ − ρ†|` entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(ρ P_q)` for the single-qubit Pauli `P` selected by `basis`.
    pub fn expectation(&self, qubit: usize, basis: Basis) -> f64 {
        let d = self.dim();
        let bit = 1usize << qubit;
        match basis {
            Basis::Z => (0..d)
                .map(|i| {
                    let v = self.get(i, i).re;
                    if i & bit == 0 {
                        v
                    } else {
                        -v
                    }
                })
                .sum(),
            Basis::X => (0..d).map(|i| self.get(i, i ^ bit).re).sum(),
            // Y[k, i] = i for (k, i) = (1, 0) and -i for (0, 1)
            Basis::Y => (0..d)
                .map(|i| {
                    let z = self.get(i, i ^ bit);
                    if i & bit == 0 {
                        -z.im
                    } else {
                        z.im
                    }
                })
                .sum(),
        }
    }
}

/// Noiseless state vector, used for exact labels.
pub(crate) fn statevector(c: &crate::circuit::Circuit) -> Vec<Complex64> {
    let mut psi = vec![ZERO; 1usize << c.n_qubits];
    psi[0] = Complex64::new(1.0, 0.0);
    for g in &c.gates {
        apply_to_state(&mut psi, &gate_matrix(g.kind, g.angle), &g.qubits);
    }
    psi
}

pub(crate) fn statevector_expectation(psi: &[Complex64], qubit: usize, basis: Basis) -> f64 {
    let bit = 1usize << qubit;
    match basis {
        Basis::Z => psi
            .iter()
            .enumerate()
            .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum(),
        Basis::X => psi.iter().enumerate().map(|(i, a)| (a.conj() * psi[i ^ bit]).re).sum(),
        Basis::Y => psi
            .iter()
            .enumerate()
            .map(|(i, a)| {
                // (Yψ)[i] = i·ψ[i^bit] if bit of i set, else −i·ψ[i^bit]
                let y = if i & bit == 0 {
                    Complex64::new(0.0, -1.0) * psi[i ^ bit]
                } else {
                    Complex64::new(0.0, 1.0) * psi[i ^ bit]
                };
                (a.conj() * y).re
            })
            .sum(),
    }
}
