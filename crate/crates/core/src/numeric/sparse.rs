use std::collections::BTreeSet;

use super::{NumericError, Tensor};

/// Row-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, NumericError> {
        if rows.iter().flatten().any(|&(c, _)| c >= n_cols) {
            return Err(NumericError::Shape(format!("sparse column index exceeds {n_cols}")));
        }
        Ok(SparseMatrix { n_rows: rows.len(), n_cols, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n_rows, self.n_cols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                t.set(r, c, t.get(r, c) + v);
            }
        }
        t
    }

    /// `self · x`.
    pub fn mul_dense(&self, x: &Tensor) -> Result<Tensor, NumericError> {
        if x.rows() != self.n_cols {
            return Err(NumericError::Shape(format!(
                "sparse {}x{} by {}x{}",
                self.n_rows,
                self.n_cols,
                x.rows(),
                x.cols()
            )));
        }
        let d = x.cols();
        let mut out = Tensor::zeros(self.n_rows, d);
        let od = out.data_mut();
        for (r, row) in self.rows.iter().enumerate() {
            let dst = &mut od[r * d..(r + 1) * d];
            for &(c, v) in row {
                for (o, &xi) in dst.iter_mut().zip(x.row_slice(c)) {
                    *o += v * xi;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · g`, accumulated into `out`.
    pub(crate) fn transpose_mul_into(&self, g: &Tensor, out: &mut Tensor) {
        let d = g.cols();
        let od = out.data_mut();
        for (r, row) in self.rows.iter().enumerate() {
            let src = g.row_slice(r);
            for &(c, v) in row {
                for (o, &gi) in od[c * d..(c + 1) * d].iter_mut().zip(src) {
                    *o += v * gi;
                }
            }
        }
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` for the undirected graph on `n` nodes with
/// the given edges (direction and duplicates ignored).
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Result<SparseMatrix, NumericError> {
    let mut nbrs: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(NumericError::Shape(format!("edge ({u}, {v}) outside {n} nodes")));
        }
        nbrs[u].insert(v);
        nbrs[v].insert(u);
    }
    let inv_sqrt: Vec<f64> = nbrs.iter().map(|s| 1.0 / (s.len() as f64).sqrt()).collect();
    let rows = nbrs
        .iter()
        .enumerate()
        .map(|(i, s)| s.iter().map(|&j| (j, inv_sqrt[i] * inv_sqrt[j])).collect())
        .collect();
    SparseMatrix::from_rows(n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_node() {
        let a = normalized_adjacency(1, &[]).unwrap();
        assert_eq!(a.to_dense().data(), &[1.0]);
    }

    #[test]
    fn path_of_three() {
        let a = normalized_adjacency(3, &[(0, 1), (1, 2)]).unwrap().to_dense();
        let s = 1.0 / 6.0f64.sqrt();
        let want = [0.5, s, 0.0, s, 1.0 / 3.0, s, 0.0, s, 0.5];
        for (x, y) in a.data().iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
        let dup = normalized_adjacency(3, &[(1, 0), (0, 1), (2, 1)]).unwrap().to_dense();
        assert_eq!(dup, a);
    }

    #[test]
    fn products() {
        let a = normalized_adjacency(3, &[(0, 1), (1, 2)]).unwrap();
        let x = Tensor::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let want = a.to_dense().matmul(&x).unwrap();
        for (p, q) in a.mul_dense(&x).unwrap().data().iter().zip(want.data()) {
            assert!((p - q).abs() < 1e-14);
        }
        let mut t = Tensor::zeros(3, 2);
        a.transpose_mul_into(&x, &mut t);
        let want_t = a.to_dense().transpose().matmul(&x).unwrap();
        for (p, q) in t.data().iter().zip(want_t.data()) {
            assert!((p - q).abs() < 1e-15);
        }
    }
}
