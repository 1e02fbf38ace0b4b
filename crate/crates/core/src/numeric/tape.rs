use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::fastexp::exp_nonpos;
use super::sparse::SparseMatrix;
use super::tensor::{gemm, Strided, StridedMut};
use super::{NumericError, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

static GENERATION: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`]. Handles from a previous
/// generation of the tape are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    idx: usize,
    gen: u64,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Tanh(usize),
    LayerNorm { x: usize, gamma: usize, beta: usize, xhat: Vec<f64>, inv_std: Vec<f64> },
    MeanRows { x: usize, rows: Vec<usize> },
    GatherRows { x: usize, rows: Vec<usize> },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    Mse { pred: usize, target: usize },
    Sum(usize),
    MaskedSoftmax(usize),
    Attention { q: usize, k: usize, v: usize, heads: usize, probs: Vec<Vec<f64>> },
    SpMM { adj: Arc<SparseMatrix>, x: usize },
}

/// Records tensor operations for one forward pass and replays them in
/// reverse to accumulate gradients.
#[derive(Debug)]
pub struct Tape {
    gen: u64,
    values: Vec<Tensor>,
    ops: Vec<Op>,
    tracked: Vec<bool>,
    grads: Vec<Option<Tensor>>,
    done: bool,
    /// Attention probability buffers recycled across resets.
    pool: Vec<Vec<f64>>,
    relu_signs: u64,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> NumericError {
    NumericError::Shape(format!(
        "{what}: {}x{} vs {}x{}",
        a.rows(),
        a.cols(),
        b.rows(),
        b.cols()
    ))
}

/// Sum with four independent accumulators so the loop vectorizes.
fn sum_lanes(xs: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = xs.chunks_exact(4);
    let tail: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        for (a, &x) in acc.iter_mut().zip(c) {
            *a += x;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn dot_lanes(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (cx, cy) = (xs.chunks_exact(4), ys.chunks_exact(4));
    let tail: f64 = cx.remainder().iter().zip(cy.remainder()).map(|(a, b)| a * b).sum();
    for (a4, b4) in cx.zip(cy) {
        for i in 0..4 {
            acc[i] += a4[i] * b4[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Softmax over the unmasked entries of `row`; a fully masked row becomes
/// zeros. Each pass is a separate loop so the exponentials vectorize.
fn softmax_row(row: &mut [f64], mask: Option<&[bool]>) {
    let max = match mask {
        None => row.iter().fold(f64::NEG_INFINITY, |m, &x| if x > m { x } else { m }),
        Some(m) => row.iter().zip(m).fold(f64::NEG_INFINITY, |acc, (&x, &keep)| if keep && x > acc { x } else { acc }),
    };
    if max == f64::NEG_INFINITY {
        row.fill(0.0);
        return;
    }
    match mask {
        None => row.iter_mut().for_each(|x| *x = exp_nonpos(*x - max)),
        Some(m) => {
            for (x, &keep) in row.iter_mut().zip(m) {
                let e = exp_nonpos(*x - max);
                *x = if keep { e } else { 0.0 };
            }
        }
    }
    let inv = 1.0 / sum_lanes(row);
    row.iter_mut().for_each(|x| *x *= inv);
}

/// Row-wise `dS = P ⊙ (dP − rowsum(dP ⊙ P))`, in place on `dp`.
fn softmax_backward_rows(p: &[f64], dp: &mut [f64], cols: usize) {
    for (pr, dr) in p.chunks_exact(cols).zip(dp.chunks_exact_mut(cols)) {
        let dot = dot_lanes(pr, dr);
        for (d, &pv) in dr.iter_mut().zip(pr) {
            *d = pv * (*d - dot);
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], i: usize, shape: [usize; 2]) -> &'a mut Tensor {
    grads[i].get_or_insert_with(|| Tensor::zeros(shape[0], shape[1]))
}

const SIGNS_SEED: u64 = 0xcbf2_9ce4_8422_2325;

impl Tape {
    pub fn new() -> Self {
        Tape {
            gen: GENERATION.fetch_add(1, Ordering::Relaxed),
            values: Vec::new(),
            ops: Vec::new(),
            tracked: Vec::new(),
            grads: Vec::new(),
            done: false,
            pool: Vec::new(),
            relu_signs: SIGNS_SEED,
        }
    }

    /// Clears every record; handles issued before the reset become stale.
    pub fn reset(&mut self) {
        self.gen = GENERATION.fetch_add(1, Ordering::Relaxed);
        self.values.clear();
        for op in self.ops.drain(..) {
            if let Op::Attention { probs, .. } = op {
                self.pool.extend(probs);
            }
        }
        self.tracked.clear();
        self.grads.clear();
        self.done = false;
        self.relu_signs = SIGNS_SEED;
    }

    /// Hash of the sign of every input fed to [`Tape::relu`] since the last
    /// reset. Two evaluations with different hashes sit on different sides
    /// of some ReLU kink.
    pub fn relu_signs(&self) -> u64 {
        self.relu_signs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn id(&self, v: Var) -> Result<usize, NumericError> {
        if v.gen != self.gen || v.idx >= self.values.len() {
            return Err(NumericError::StaleTape);
        }
        Ok(v.idx)
    }

    pub fn value(&self, v: Var) -> Result<&Tensor, NumericError> {
        Ok(&self.values[self.id(v)?])
    }

    /// Gradient of the last backward pass with respect to a tracked leaf.
    pub fn grad(&self, v: Var) -> Result<Option<&Tensor>, NumericError> {
        let i = self.id(v)?;
        Ok(self.grads.get(i).and_then(Option::as_ref))
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool, name: &'static str) -> Result<Var, NumericError> {
        if self.done {
            return Err(NumericError::StaleTape);
        }
        if !value.is_finite() {
            return Err(NumericError::NonFinite(name));
        }
        self.values.push(value);
        self.ops.push(op);
        self.tracked.push(tracked);
        Ok(Var { idx: self.values.len() - 1, gen: self.gen })
    }

    /// Records a leaf; gradients are accumulated for it when `requires_grad`.
    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Result<Var, NumericError> {
        self.push(t, Op::Leaf, requires_grad, "leaf")
    }

    pub fn param(&mut self, t: Tensor) -> Result<Var, NumericError> {
        self.leaf(t, true)
    }

    pub fn constant(&mut self, t: Tensor) -> Result<Var, NumericError> {
        self.leaf(t, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let out = {
            let (x, y) = (&self.values[ia], &self.values[ib]);
            x.matmul(y).map_err(|_| shape_err("matmul", x, y))?
        };
        let t = self.tracked[ia] || self.tracked[ib];
        self.push(out, Op::MatMul(ia, ib), t, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let (x, y) = (&self.values[ia], &self.values[ib]);
        if x.shape() != y.shape() {
            return Err(shape_err("add", x, y));
        }
        let mut out = x.clone();
        out.add_assign(y);
        let t = self.tracked[ia] || self.tracked[ib];
        self.push(out, Op::Add(ia, ib), t, "add")
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NumericError> {
        let (ia, ib) = (self.id(a)?, self.id(row)?);
        let (x, r) = (&self.values[ia], &self.values[ib]);
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err("add_row", x, r));
        }
        let mut out = x.clone();
        let c = x.cols();
        for chunk in out.data_mut().chunks_exact_mut(c.max(1)) {
            for (o, b) in chunk.iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        let t = self.tracked[ia] || self.tracked[ib];
        self.push(out, Op::AddRow(ia, ib), t, "add_row")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let (x, y) = (&self.values[ia], &self.values[ib]);
        if x.shape() != y.shape() {
            return Err(shape_err("mul", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::from_vec(x.rows(), x.cols(), data)?;
        let t = self.tracked[ia] || self.tracked[ib];
        self.push(out, Op::Mul(ia, ib), t, "mul")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, NumericError> {
        let ia = self.id(a)?;
        let x = &self.values[ia];
        let out = Tensor::from_vec(x.rows(), x.cols(), x.data().iter().map(|v| v * s).collect())?;
        let t = self.tracked[ia];
        self.push(out, Op::Scale(ia, s), t, "scale")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumericError> {
        let ia = self.id(a)?;
        let x = &self.values[ia];
        self.relu_signs = x.data().iter().fold(self.relu_signs, |h, &v| (h ^ u64::from(v > 0.0)).wrapping_mul(0x100_0000_01b3));
        let out = Tensor::from_vec(x.rows(), x.cols(), x.data().iter().map(|v| v.max(0.0)).collect())?;
        let t = self.tracked[ia];
        self.push(out, Op::Relu(ia), t, "relu")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumericError> {
        let ia = self.id(a)?;
        let x = &self.values[ia];
        let out = Tensor::from_vec(x.rows(), x.cols(), x.data().iter().map(|v| v.tanh()).collect())?;
        let t = self.tracked[ia];
        self.push(out, Op::Tanh(ia), t, "tanh")
    }

    /// Per-row normalization to zero mean and unit variance (ε = 1e-5),
    /// followed by the `1 × c` affine `γ ⊙ x̂ + β`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, NumericError> {
        let (ix, ig, ib) = (self.id(x)?, self.id(gamma)?, self.id(beta)?);
        let (xv, g, b) = (&self.values[ix], &self.values[ig], &self.values[ib]);
        let c = xv.cols();
        if g.shape() != [1, c] || b.shape() != [1, c] || c == 0 {
            return Err(shape_err("layer_norm", xv, g));
        }
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = Vec::with_capacity(xv.rows());
        let mut out = Tensor::zeros(xv.rows(), c);
        for r in 0..xv.rows() {
            let row = xv.row_slice(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            let xh = &mut xhat[r * c..(r + 1) * c];
            let o = &mut out.data_mut()[r * c..(r + 1) * c];
            for j in 0..c {
                xh[j] = (row[j] - mean) * is;
                o[j] = xh[j] * g.data()[j] + b.data()[j];
            }
        }
        let t = self.tracked[ix] || self.tracked[ig] || self.tracked[ib];
        self.push(out, Op::LayerNorm { x: ix, gamma: ig, beta: ib, xhat, inv_std }, t, "layer_norm")
    }

    /// Mean of the listed rows as a `1 × c` row.
    pub fn mean_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var, NumericError> {
        let ix = self.id(x)?;
        let xv = &self.values[ix];
        if rows.is_empty() {
            return Err(NumericError::EmptyPool);
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= xv.rows()) {
            return Err(NumericError::Shape(format!("row {r} of a {}-row tensor", xv.rows())));
        }
        let mut out = vec![0.0; xv.cols()];
        for &r in rows {
            for (o, v) in out.iter_mut().zip(xv.row_slice(r)) {
                *o += v;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let t = self.tracked[ix];
        self.push(Tensor::row(out), Op::MeanRows { x: ix, rows: rows.to_vec() }, t, "mean_rows")
    }

    pub fn mean_all_rows(&mut self, x: Var) -> Result<Var, NumericError> {
        let n = self.value(x)?.rows();
        let rows: Vec<usize> = (0..n).collect();
        self.mean_rows(x, &rows)
    }

    /// Stacks the listed rows (repeats allowed) into a new tensor.
    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var, NumericError> {
        let ix = self.id(x)?;
        let xv = &self.values[ix];
        if let Some(&r) = rows.iter().find(|&&r| r >= xv.rows()) {
            return Err(NumericError::Shape(format!("row {r} of a {}-row tensor", xv.rows())));
        }
        let mut data = Vec::with_capacity(rows.len() * xv.cols());
        for &r in rows {
            data.extend_from_slice(xv.row_slice(r));
        }
        let out = Tensor::from_vec(rows.len(), xv.cols(), data)?;
        let t = self.tracked[ix];
        self.push(out, Op::GatherRows { x: ix, rows: rows.to_vec() }, t, "gather_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let ids = parts.iter().map(|&p| self.id(p)).collect::<Result<Vec<_>, _>>()?;
        let rows = ids.first().map(|&i| self.values[i].rows()).ok_or(NumericError::Shape("empty concat".into()))?;
        if let Some(&bad) = ids.iter().find(|&&i| self.values[i].rows() != rows) {
            return Err(shape_err("concat_cols", &self.values[ids[0]], &self.values[bad]));
        }
        let cols: usize = ids.iter().map(|&i| self.values[i].cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &i in &ids {
                let src = self.values[i].row_slice(r);
                out.data_mut()[r * cols + off..r * cols + off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let t = ids.iter().any(|&i| self.tracked[i]);
        self.push(out, Op::ConcatCols(ids), t, "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let ids = parts.iter().map(|&p| self.id(p)).collect::<Result<Vec<_>, _>>()?;
        let cols = ids.first().map(|&i| self.values[i].cols()).ok_or(NumericError::Shape("empty concat".into()))?;
        if let Some(&bad) = ids.iter().find(|&&i| self.values[i].cols() != cols) {
            return Err(shape_err("concat_rows", &self.values[ids[0]], &self.values[bad]));
        }
        let mut data = Vec::new();
        for &i in &ids {
            data.extend_from_slice(self.values[i].data());
        }
        let rows = data.len() / cols.max(1);
        let out = Tensor::from_vec(rows, cols, data)?;
        let t = ids.iter().any(|&i| self.tracked[i]);
        self.push(out, Op::ConcatRows(ids), t, "concat_rows")
    }

    /// Mean squared difference over all entries, as a scalar.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NumericError> {
        let (ip, it) = (self.id(pred)?, self.id(target)?);
        let (p, y) = (&self.values[ip], &self.values[it]);
        if p.shape() != y.shape() || p.is_empty() {
            return Err(shape_err("mse", p, y));
        }
        let s: f64 = p.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let out = Tensor::scalar(s / p.len() as f64);
        let t = self.tracked[ip] || self.tracked[it];
        self.push(out, Op::Mse { pred: ip, target: it }, t, "mse")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumericError> {
        let ia = self.id(a)?;
        let out = Tensor::scalar(self.values[ia].data().iter().sum());
        let t = self.tracked[ia];
        self.push(out, Op::Sum(ia), t, "sum")
    }

    /// Row-wise softmax restricted to entries where `mask` (row-major, same
    /// shape) is true. Masked entries and fully masked rows are zero.
    pub fn masked_softmax(&mut self, scores: Var, mask: &[bool]) -> Result<Var, NumericError> {
        let ia = self.id(scores)?;
        let x = &self.values[ia];
        if mask.len() != x.len() {
            return Err(NumericError::Shape(format!("mask of {} for {}x{} scores", mask.len(), x.rows(), x.cols())));
        }
        let mut out = x.clone();
        let c = x.cols().max(1);
        for (row, m) in out.data_mut().chunks_exact_mut(c).zip(mask.chunks_exact(c)) {
            softmax_row(row, Some(m));
        }
        let t = self.tracked[ia];
        self.push(out, Op::MaskedSoftmax(ia), t, "masked_softmax")
    }

    /// Multi-head scaled dot-product attention. `q: n × d`, `k, v: m × d`,
    /// `d` split evenly over `heads`; each head computes
    /// `softmax_mask(Q_h K_hᵀ / √d_h) · V_h`. The optional mask is `n × m`
    /// row-major; fully masked rows produce zeros.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, mask: Option<&[bool]>) -> Result<Var, NumericError> {
        let (iq, ik, iv) = (self.id(q)?, self.id(k)?, self.id(v)?);
        let (qv, kv, vv) = (&self.values[iq], &self.values[ik], &self.values[iv]);
        let (n, m, d) = (qv.rows(), kv.rows(), qv.cols());
        if kv.cols() != d || vv.shape() != kv.shape() {
            return Err(shape_err("attention", qv, kv));
        }
        if heads == 0 || d % heads != 0 {
            return Err(NumericError::Shape(format!("{d} columns do not split into {heads} heads")));
        }
        if let Some(mk) = mask {
            if mk.len() != n * m {
                return Err(NumericError::Shape(format!("attention mask of {} for {n}x{m}", mk.len())));
            }
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let t = self.tracked[iq] || self.tracked[ik] || self.tracked[iv];
        let mut out = Tensor::zeros(n, d);
        let mut probs = Vec::with_capacity(heads);
        let mut scratch = Vec::new();
        for h in 0..heads {
            let off = h * dh;
            let mut p = if t || scratch.is_empty() { self.pool.pop().unwrap_or_default() } else { std::mem::take(&mut scratch) };
            p.resize(n * m, 0.0);
            gemm(
                n,
                dh,
                m,
                scale,
                Strided::row_major(qv.data(), d).at(off),
                Strided::transposed(kv.data(), d).at(off),
                0.0,
                StridedMut::row_major(&mut p, m),
            );
            for (r, row) in p.chunks_exact_mut(m.max(1)).enumerate() {
                softmax_row(row, mask.map(|mk| &mk[r * m..(r + 1) * m]));
            }
            gemm(
                n,
                m,
                dh,
                1.0,
                Strided::row_major(&p, m),
                Strided::row_major(vv.data(), d).at(off),
                0.0,
                StridedMut::row_major(out.data_mut(), d).at(off),
            );
            if t {
                probs.push(p);
            } else {
                scratch = p;
            }
        }
        if !scratch.is_empty() {
            self.pool.push(scratch);
        }
        self.push(out, Op::Attention { q: iq, k: ik, v: iv, heads, probs }, t, "attention")
    }

    /// Sparse-by-dense product `adj · x`.
    pub fn spmm(&mut self, adj: Arc<SparseMatrix>, x: Var) -> Result<Var, NumericError> {
        let ix = self.id(x)?;
        let out = adj.mul_dense(&self.values[ix])?;
        let t = self.tracked[ix];
        self.push(out, Op::SpMM { adj, x: ix }, t, "spmm")
    }

    /// Populates gradients of `loss` (a `1 × 1` value on this tape) with
    /// respect to every tracked leaf. Allowed once per tape generation.
    pub fn backward(&mut self, loss: Var) -> Result<(), NumericError> {
        let il = self.id(loss)?;
        if self.done {
            return Err(NumericError::StaleTape);
        }
        if self.values[il].shape() != [1, 1] {
            return Err(NumericError::NonScalarLoss(self.values[il].shape()));
        }
        self.done = true;
        let n = self.values.len();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[il] = Some(Tensor::scalar(1.0));
        let values = &self.values;
        let tracked = &self.tracked;
        for i in (0..=il).rev() {
            if !tracked[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if !g.is_finite() {
                return Err(NumericError::NonFinite("gradient"));
            }
            match &self.ops[i] {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                &Op::MatMul(a, b) => {
                    let (av, bv) = (&values[a], &values[b]);
                    let (nr, kk, mc) = (av.rows(), av.cols(), bv.cols());
                    if tracked[a] {
                        let ga = slot(&mut grads, a, av.shape());
                        gemm(nr, mc, kk, 1.0, Strided::row_major(g.data(), mc), Strided::transposed(bv.data(), mc), 1.0, StridedMut::row_major(ga.data_mut(), kk));
                    }
                    if tracked[b] {
                        let gb = slot(&mut grads, b, bv.shape());
                        gemm(kk, nr, mc, 1.0, Strided::transposed(av.data(), kk), Strided::row_major(g.data(), mc), 1.0, StridedMut::row_major(gb.data_mut(), mc));
                    }
                }
                &Op::Add(a, b) => {
                    for x in [a, b] {
                        if tracked[x] {
                            slot(&mut grads, x, g.shape()).add_assign(&g);
                        }
                    }
                }
                &Op::AddRow(a, r) => {
                    if tracked[a] {
                        slot(&mut grads, a, g.shape()).add_assign(&g);
                    }
                    if tracked[r] {
                        let c = g.cols();
                        let gr = slot(&mut grads, r, [1, c]);
                        for chunk in g.data().chunks_exact(c.max(1)) {
                            for (o, v) in gr.data_mut().iter_mut().zip(chunk) {
                                *o += v;
                            }
                        }
                    }
                }
                &Op::Mul(a, b) => {
                    for (x, other) in [(a, b), (b, a)] {
                        if tracked[x] {
                            let o = &values[other];
                            let gx = slot(&mut grads, x, g.shape());
                            for ((d, gv), ov) in gx.data_mut().iter_mut().zip(g.data()).zip(o.data()) {
                                *d += gv * ov;
                            }
                        }
                    }
                }
                &Op::Scale(a, s) => {
                    if tracked[a] {
                        let ga = slot(&mut grads, a, g.shape());
                        for (d, gv) in ga.data_mut().iter_mut().zip(g.data()) {
                            *d += s * gv;
                        }
                    }
                }
                &Op::Relu(a) => {
                    let x = &values[a];
                    let ga = slot(&mut grads, a, g.shape());
                    for ((d, gv), xv) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        if *xv > 0.0 {
                            *d += gv;
                        }
                    }
                }
                &Op::Tanh(a) => {
                    let y = &values[i];
                    let ga = slot(&mut grads, a, g.shape());
                    for ((d, gv), yv) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *d += gv * (1.0 - yv * yv);
                    }
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let (x, gamma, beta) = (*x, *gamma, *beta);
                    let c = g.cols();
                    let gam = values[gamma].data();
                    if tracked[gamma] {
                        let gg = slot(&mut grads, gamma, [1, c]);
                        for (gr, xr) in g.data().chunks_exact(c).zip(xhat.chunks_exact(c)) {
                            for ((o, gv), xv) in gg.data_mut().iter_mut().zip(gr).zip(xr) {
                                *o += gv * xv;
                            }
                        }
                    }
                    if tracked[beta] {
                        let gb = slot(&mut grads, beta, [1, c]);
                        for gr in g.data().chunks_exact(c) {
                            for (o, gv) in gb.data_mut().iter_mut().zip(gr) {
                                *o += gv;
                            }
                        }
                    }
                    if tracked[x] {
                        let gx = slot(&mut grads, x, g.shape());
                        let cf = c as f64;
                        let mut dxh = vec![0.0; c];
                        for (r, (gr, xr)) in g.data().chunks_exact(c).zip(xhat.chunks_exact(c)).enumerate() {
                            let (mut s1, mut s2) = (0.0, 0.0);
                            for j in 0..c {
                                dxh[j] = gr[j] * gam[j];
                                s1 += dxh[j];
                                s2 += dxh[j] * xr[j];
                            }
                            let k = inv_std[r] / cf;
                            let dst = &mut gx.data_mut()[r * c..(r + 1) * c];
                            for j in 0..c {
                                dst[j] += k * (cf * dxh[j] - s1 - xr[j] * s2);
                            }
                        }
                    }
                }
                Op::MeanRows { x, rows } => {
                    let x = *x;
                    let shape = values[x].shape();
                    let gx = slot(&mut grads, x, shape);
                    let c = shape[1];
                    let inv = 1.0 / rows.len() as f64;
                    for &r in rows {
                        for (o, gv) in gx.data_mut()[r * c..(r + 1) * c].iter_mut().zip(g.data()) {
                            *o += inv * gv;
                        }
                    }
                }
                Op::GatherRows { x, rows } => {
                    let x = *x;
                    let shape = values[x].shape();
                    let gx = slot(&mut grads, x, shape);
                    let c = shape[1];
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, gv) in gx.data_mut()[r * c..(r + 1) * c].iter_mut().zip(g.row_slice(k)) {
                            *o += gv;
                        }
                    }
                }
                Op::ConcatCols(ids) => {
                    let total = g.cols();
                    let mut off = 0;
                    for &p in ids {
                        let shape = values[p].shape();
                        if tracked[p] {
                            let gp = slot(&mut grads, p, shape);
                            for r in 0..shape[0] {
                                let src = &g.data()[r * total + off..r * total + off + shape[1]];
                                for (o, gv) in gp.data_mut()[r * shape[1]..(r + 1) * shape[1]].iter_mut().zip(src) {
                                    *o += gv;
                                }
                            }
                        }
                        off += shape[1];
                    }
                }
                Op::ConcatRows(ids) => {
                    let mut off = 0;
                    for &p in ids {
                        let len = values[p].len();
                        if tracked[p] {
                            let gp = slot(&mut grads, p, values[p].shape());
                            for (o, gv) in gp.data_mut().iter_mut().zip(&g.data()[off..off + len]) {
                                *o += gv;
                            }
                        }
                        off += len;
                    }
                }
                &Op::Mse { pred, target } => {
                    let (p, y) = (&values[pred], &values[target]);
                    let k = 2.0 * g.item() / p.len() as f64;
                    for (x, sign) in [(pred, 1.0), (target, -1.0)] {
                        if tracked[x] {
                            let gx = slot(&mut grads, x, p.shape());
                            for ((o, a), b) in gx.data_mut().iter_mut().zip(p.data()).zip(y.data()) {
                                *o += sign * k * (a - b);
                            }
                        }
                    }
                }
                &Op::Sum(a) => {
                    let gv = g.item();
                    let ga = slot(&mut grads, a, values[a].shape());
                    ga.data_mut().iter_mut().for_each(|o| *o += gv);
                }
                &Op::MaskedSoftmax(a) => {
                    let p = &values[i];
                    let mut ds = g.data().to_vec();
                    softmax_backward_rows(p.data(), &mut ds, p.cols().max(1));
                    let ga = slot(&mut grads, a, p.shape());
                    for (o, d) in ga.data_mut().iter_mut().zip(ds) {
                        *o += d;
                    }
                }
                Op::Attention { q, k, v, heads, probs } => {
                    let (q, k, v, heads) = (*q, *k, *v, *heads);
                    let (qv, kv, vv) = (&values[q], &values[k], &values[v]);
                    let (n, m, d) = (qv.rows(), kv.rows(), qv.cols());
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut gq = grads[q].take().unwrap_or_else(|| Tensor::zeros(n, d));
                    let mut gk = grads[k].take().unwrap_or_else(|| Tensor::zeros(m, d));
                    let mut gvv = grads[v].take().unwrap_or_else(|| Tensor::zeros(m, d));
                    let mut dp = vec![0.0; n * m];
                    for (h, p) in probs.iter().enumerate() {
                        let off = h * dh;
                        if tracked[v] {
                            gemm(m, n, dh, 1.0, Strided::transposed(p, m), Strided::row_major(g.data(), d).at(off), 1.0, StridedMut::row_major(gvv.data_mut(), d).at(off));
                        }
                        if !(tracked[q] || tracked[k]) {
                            continue;
                        }
                        gemm(n, dh, m, 1.0, Strided::row_major(g.data(), d).at(off), Strided::transposed(vv.data(), d).at(off), 0.0, StridedMut::row_major(&mut dp, m));
                        softmax_backward_rows(p, &mut dp, m.max(1));
                        if tracked[q] {
                            gemm(n, m, dh, scale, Strided::row_major(&dp, m), Strided::row_major(kv.data(), d).at(off), 1.0, StridedMut::row_major(gq.data_mut(), d).at(off));
                        }
                        if tracked[k] {
                            gemm(m, n, dh, scale, Strided::transposed(&dp, m), Strided::row_major(qv.data(), d).at(off), 1.0, StridedMut::row_major(gk.data_mut(), d).at(off));
                        }
                    }
                    // q, k and v may alias the same record
                    let mut put = |idx: usize, t: Tensor| {
                        if tracked[idx] {
                            match &mut grads[idx] {
                                Some(existing) => existing.add_assign(&t),
                                none => *none = Some(t),
                            }
                        }
                    };
                    put(q, gq);
                    put(k, gk);
                    put(v, gvv);
                }
                Op::SpMM { adj, x } => {
                    let x = *x;
                    let gx = slot(&mut grads, x, values[x].shape());
                    adj.transpose_mul_into(&g, gx);
                }
            }
        }
        self.grads = grads;
        Ok(())
    }
}
