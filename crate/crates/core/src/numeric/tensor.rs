use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NumericError;

/// Dense row-major matrix of doubles. Vectors are `1 × n`, scalars `1 × 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumericError> {
        if data.len() != rows * cols {
            return Err(NumericError::Shape(format!(
                "{} values do not fill a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn scalar(x: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn row(data: Vec<f64>) -> Self {
        Tensor { rows: 1, cols: data.len(), data }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Xavier/Glorot uniform: `U(−a, a)` with `a = √(6 / (rows + cols))`.
    pub fn xavier_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
        Tensor { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single entry of a `1 × 1` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Tensor {
        let mut t = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Plain product, no tape.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, NumericError> {
        if self.cols != other.rows {
            return Err(NumericError::Shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            1.0,
            Strided::row_major(&self.data, self.cols),
            Strided::row_major(&other.data, other.cols),
            0.0,
            StridedMut::row_major(&mut out.data, other.cols),
        );
        Ok(out)
    }
}

/// Read-only strided view for [`gemm`].
#[derive(Clone, Copy)]
pub(crate) struct Strided<'a> {
    pub data: &'a [f64],
    pub offset: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> Strided<'a> {
    pub fn row_major(data: &'a [f64], cols: usize) -> Self {
        Strided { data, offset: 0, rs: cols, cs: 1 }
    }

    /// Transposed view of a row-major `? × cols` buffer.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Strided { data, offset: 0, rs: 1, cs: cols }
    }

    pub fn at(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }
}

pub(crate) struct StridedMut<'a> {
    pub data: &'a mut [f64],
    pub offset: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> StridedMut<'a> {
    pub fn row_major(data: &'a mut [f64], cols: usize) -> Self {
        StridedMut { data, offset: 0, rs: cols, cs: 1 }
    }

    pub fn at(mut self, offset: usize) -> Self {
        self.offset = offset;
        self
    }
}

fn last_index(rows: usize, cols: usize, offset: usize, rs: usize, cs: usize) -> usize {
    offset + (rows - 1) * rs + (cols - 1) * cs
}

/// `C ← α·A·B + β·C` with `A: m×k`, `B: k×n`, `C: m×n` as strided views.
pub(crate) fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: Strided, b: Strided, beta: f64, c: StridedMut) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(last_index(m, n, c.offset, c.rs, c.cs) < c.data.len(), "gemm: C view out of bounds");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let x = &mut c.data[c.offset + i * c.rs + j * c.cs];
                *x = if beta == 0.0 { 0.0 } else { beta * *x };
            }
        }
        return;
    }
    assert!(last_index(m, k, a.offset, a.rs, a.cs) < a.data.len(), "gemm: A view out of bounds");
    assert!(last_index(k, n, b.offset, b.rs, b.cs) < b.data.len(), "gemm: B view out of bounds");
    // SAFETY: every index touched by the kernel lies inside the slices, as
    // checked above; `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.offset),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs as isize,
            c.cs as isize,
        );
    }
}
