use std::collections::BTreeMap;
use std::sync::Arc;

use crate::numeric::{normalized_adjacency, GradCheck, SparseMatrix, Tape, Tensor, Var};

use super::input::attention_masks;
use super::{AttnBlock, Layer, Layout, ModelError, ModelParams, PreparedCircuit, Variant, NODE_FEATURES};

/// How the lightcone-restricted path is evaluated. Both give the same
/// result up to rounding; `Gathered` only touches lightcone rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalEvaluation {
    /// Runs the local blocks on the lightcone rows alone.
    #[default]
    Gathered,
    /// Runs the local blocks on every node with the `N × N` lightcone mask.
    DenseMasked,
}

fn attention_block(tape: &mut Tape, p: &[Var], b: &AttnBlock, h: Var, heads: usize, mask: Option<&[bool]>) -> Result<Var, ModelError> {
    let proj = |tape: &mut Tape, w: usize, bias: usize, x: Var| -> Result<Var, ModelError> {
        let y = tape.matmul(x, p[w])?;
        Ok(tape.add_row(y, p[bias])?)
    };
    let q = proj(tape, b.wq, b.bq, h)?;
    let k = proj(tape, b.wk, b.bk, h)?;
    let v = proj(tape, b.wv, b.bv, h)?;
    let a = tape.attention(q, k, v, heads, mask)?;
    let o = proj(tape, b.wo, b.bo, a)?;
    let r = tape.add(h, o)?;
    let a1 = tape.layer_norm(r, p[b.ln1_g], p[b.ln1_b])?;
    let f = proj(tape, b.w1, b.b1, a1)?;
    let f = tape.relu(f)?;
    let f = proj(tape, b.w2, b.b2, f)?;
    let r2 = tape.add(a1, f)?;
    Ok(tape.layer_norm(r2, p[b.ln2_g], p[b.ln2_b])?)
}

/// One graph-convolution layer `relu(Â · h · W)`.
pub fn gcn_layer(tape: &mut Tape, h: Var, adjacency: Arc<SparseMatrix>, w: Var) -> Result<Var, ModelError> {
    let m = tape.spmm(adjacency, h)?;
    let y = tape.matmul(m, w)?;
    Ok(tape.relu(y)?)
}

fn run_layers(
    tape: &mut Tape,
    p: &[Var],
    layers: &[Layer],
    mut h: Var,
    heads: usize,
    mask: Option<&[bool]>,
    adjacency: Option<&Arc<SparseMatrix>>,
) -> Result<Var, ModelError> {
    for layer in layers {
        h = match layer {
            Layer::Attention(b) => attention_block(tape, p, b, h, heads, mask)?,
            Layer::Gcn { w, ln_g, ln_b } => {
                let adj = adjacency.ok_or_else(|| ModelError::Mismatch("GCN layer without adjacency".into()))?;
                let g = gcn_layer(tape, h, adj.clone(), p[*w])?;
                let r = tape.add(h, g)?;
                tape.layer_norm(r, p[*ln_g], p[*ln_b])?
            }
        };
    }
    Ok(h)
}

/// Adjacency of the subgraph induced by `nodes`, indexed by position in
/// `nodes`.
fn induced_adjacency(nodes: &[usize], edges: &[(usize, usize)], n: usize) -> Result<Arc<SparseMatrix>, ModelError> {
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in nodes.iter().enumerate() {
        pos[v] = i;
    }
    let sub: Vec<(usize, usize)> = edges
        .iter()
        .filter(|&&(u, v)| pos[u] != usize::MAX && pos[v] != usize::MAX)
        .map(|&(u, v)| (pos[u], pos[v]))
        .collect();
    Ok(Arc::new(normalized_adjacency(nodes.len(), &sub)?))
}

fn check_input(params: &ModelParams, x: &PreparedCircuit) -> Result<(), ModelError> {
    let cfg = &params.config;
    let n = x.n_nodes();
    if n > cfg.max_nodes {
        return Err(ModelError::TooManyNodes { n, max: cfg.max_nodes });
    }
    if n == 0 || x.features.cols() != NODE_FEATURES {
        return Err(ModelError::Mismatch(format!("node features {:?}", x.features.shape())));
    }
    if x.qubits.is_empty() || x.lightcones.len() != x.qubits.len() || x.descriptors.len() != x.qubits.len() {
        return Err(ModelError::Mismatch("qubit, lightcone and descriptor counts differ".into()));
    }
    if let Some(d) = x.descriptors.iter().find(|d| d.len() != cfg.descriptor_dim) {
        return Err(ModelError::Mismatch(format!("descriptor length {} vs configured {}", d.len(), cfg.descriptor_dim)));
    }
    for cone in &x.lightcones {
        if cone.is_empty() || cone.iter().any(|&v| v >= n) {
            return Err(ModelError::Mismatch("lightcone does not fit the graph".into()));
        }
    }
    if x.edges.iter().any(|&(u, v)| u >= n || v >= n) {
        return Err(ModelError::Mismatch("edge outside the graph".into()));
    }
    Ok(())
}

/// Records the model on `tape` and returns the `M × 1` predictions.
pub(crate) fn record(
    tape: &mut Tape,
    params: &ModelParams,
    layout: &Layout,
    x: &PreparedCircuit,
    mode: LocalEvaluation,
    requires_grad: bool,
) -> Result<(Vec<Var>, Var), ModelError> {
    check_input(params, x)?;
    let cfg = &params.config;
    let heads = cfg.n_heads;
    let n = x.n_nodes();
    let p = params
        .tensors
        .iter()
        .map(|t| tape.leaf(t.clone(), requires_grad))
        .collect::<Result<Vec<_>, _>>()?;
    let feats = tape.constant(x.features.clone())?;
    let h0 = tape.matmul(feats, p[layout.embed_w])?;
    let h0 = tape.add_row(h0, p[layout.embed_b])?;
    let gcn = cfg.variant == Variant::GcnBackbone;

    let global = match &layout.global {
        Some(layers) => {
            let adj = if gcn { Some(Arc::new(normalized_adjacency(n, &x.edges)?)) } else { None };
            let h = run_layers(tape, &p, layers, h0, heads, None, adj.as_ref())?;
            Some(tape.mean_all_rows(h)?)
        }
        None => None,
    };

    let mut local_pools = Vec::with_capacity(x.qubits.len());
    if cfg.variant == Variant::NoLightcone {
        let h = run_layers(tape, &p, &layout.local, h0, heads, None, None)?;
        for cone in &x.lightcones {
            local_pools.push(tape.mean_rows(h, cone)?);
        }
    } else if mode == LocalEvaluation::DenseMasked && !gcn {
        let masks = attention_masks(n, &x.lightcones);
        for (cone, mask) in x.lightcones.iter().zip(&masks.local) {
            let h = run_layers(tape, &p, &layout.local, h0, heads, Some(mask), None)?;
            local_pools.push(tape.mean_rows(h, cone)?);
        }
    } else {
        for cone in &x.lightcones {
            let adj = if gcn { Some(induced_adjacency(cone, &x.edges, n)?) } else { None };
            let sub = tape.gather_rows(h0, cone)?;
            let h = run_layers(tape, &p, &layout.local, sub, heads, None, adj.as_ref())?;
            local_pools.push(tape.mean_all_rows(h)?);
        }
    }

    let mut rows = Vec::with_capacity(x.qubits.len());
    for (pool, desc) in local_pools.into_iter().zip(&x.descriptors) {
        let d = tape.constant(Tensor::row(desc.clone()))?;
        let parts: Vec<Var> = match global {
            Some(g) => vec![pool, g, d],
            None => vec![pool, d],
        };
        rows.push(tape.concat_cols(&parts)?);
    }
    let mut z = tape.concat_rows(&rows)?;
    let last = layout.mlp.len() - 1;
    for (i, &(w, b)) in layout.mlp.iter().enumerate() {
        z = tape.matmul(z, p[w])?;
        z = tape.add_row(z, p[b])?;
        z = if i < last { tape.relu(z)? } else { tape.tanh(z)? };
    }
    Ok((p, z))
}

/// Predictions for every measured qubit of `x`, in `x.qubits` order.
pub fn forward(params: &ModelParams, x: &PreparedCircuit, mode: LocalEvaluation) -> Result<Vec<f64>, ModelError> {
    forward_on(&mut Tape::new(), params, x, mode)
}

/// [`forward`] on a caller-owned tape, which is reset first. Reusing one
/// tape across circuits recycles its scratch buffers.
pub fn forward_on(tape: &mut Tape, params: &ModelParams, x: &PreparedCircuit, mode: LocalEvaluation) -> Result<Vec<f64>, ModelError> {
    tape.reset();
    let layout = params.layout();
    let (_, out) = record(tape, params, &layout, x, mode, false)?;
    Ok(tape.value(out)?.data().to_vec())
}

/// Mean squared error over the measured qubits of `x` and its gradient
/// with respect to every parameter tensor.
pub fn loss_and_grads(params: &ModelParams, x: &PreparedCircuit, targets: &[f64]) -> Result<(f64, Vec<Tensor>), ModelError> {
    loss_and_grads_on(&mut Tape::new(), params, x, targets)
}

/// [`loss_and_grads`] on a caller-owned tape, which is reset first.
pub fn loss_and_grads_on(
    tape: &mut Tape,
    params: &ModelParams,
    x: &PreparedCircuit,
    targets: &[f64],
) -> Result<(f64, Vec<Tensor>), ModelError> {
    tape.reset();
    if targets.len() != x.qubits.len() {
        return Err(ModelError::Mismatch(format!("{} targets for {} qubits", targets.len(), x.qubits.len())));
    }
    let layout = params.layout();
    let (p, out) = record(tape, params, &layout, x, LocalEvaluation::Gathered, true)?;
    let y = tape.constant(Tensor::from_vec(targets.len(), 1, targets.to_vec())?)?;
    let loss = tape.mse(out, y)?;
    tape.backward(loss)?;
    let value = tape.value(loss)?.item();
    let grads = p
        .iter()
        .zip(&params.tensors)
        .map(|(&v, t)| Ok(tape.grad(v)?.cloned().unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()))))
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok((value, grads))
}

/// Predictions keyed by `(circuit_id, qubit)`.
pub fn predict_batch(params: &ModelParams, xs: &[PreparedCircuit]) -> Result<BTreeMap<(usize, usize), f64>, ModelError> {
    let mut out = BTreeMap::new();
    let mut tape = Tape::new();
    for x in xs {
        let preds = forward_on(&mut tape, params, x, LocalEvaluation::Gathered)?;
        for (&q, y) in x.qubits.iter().zip(preds) {
            out.insert((x.circuit_id, q), y);
        }
    }
    Ok(out)
}

/// Central-difference check of [`loss_and_grads`] over every parameter
/// entry. Relative error is `|a − n| / max(|a|, |n|, 1e-6)`. The report's
/// `relu_margin` tells whether the point sits close enough to a ReLU kink
/// for central differences to be meaningless there.
pub fn model_gradient_check(
    params: &ModelParams,
    x: &PreparedCircuit,
    targets: &[f64],
    h: f64,
) -> Result<GradCheck, ModelError> {
    let mut tape = Tape::new();
    let (_, analytic) = loss_and_grads_on(&mut tape, params, x, targets)?;
    let signs = tape.relu_signs();
    let layout = params.layout();
    let y = Tensor::from_vec(targets.len(), 1, targets.to_vec())?;
    let mut work = params.clone();
    let loss_at = |w: &ModelParams, tape: &mut Tape| -> Result<(f64, u64), ModelError> {
        tape.reset();
        let (_, out) = record(tape, w, &layout, x, LocalEvaluation::Gathered, false)?;
        let yv = tape.constant(y.clone())?;
        let l = tape.mse(out, yv)?;
        Ok((tape.value(l)?.item(), tape.relu_signs()))
    };
    let mut report = GradCheck { max_rel_err: 0.0, worst: (0, 0), n_checked: 0, kinks_crossed: 0 };
    for (i, g) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let orig = work.tensors[i].data()[j];
            work.tensors[i].data_mut()[j] = orig + h;
            let (up, s_up) = loss_at(&work, &mut tape)?;
            work.tensors[i].data_mut()[j] = orig - h;
            let (down, s_down) = loss_at(&work, &mut tape)?;
            report.kinks_crossed += usize::from(s_up != signs || s_down != signs);
            work.tensors[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = g.data()[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if err > report.max_rel_err || report.n_checked == 0 {
                report.max_rel_err = err;
                report.worst = (i, j);
            }
            report.n_checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn gcn_isolated_node() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::row(vec![1.0, -2.0])).unwrap();
        let w = tape.constant(Tensor::from_vec(2, 2, vec![0.5, 1.0, 0.25, 1.0]).unwrap()).unwrap();
        let adj = Arc::new(normalized_adjacency(1, &[]).unwrap());
        let out = gcn_layer(&mut tape, h, adj, w).unwrap();
        assert_eq!(tape.value(out).unwrap().data(), &[0.0, 0.0]);
        let h = tape.constant(Tensor::row(vec![1.0, 2.0])).unwrap();
        let adj = Arc::new(normalized_adjacency(1, &[]).unwrap());
        let out = gcn_layer(&mut tape, h, adj, w).unwrap();
        assert_eq!(tape.value(out).unwrap().data(), &[1.0, 3.0]);
    }

    #[test]
    fn gcn_symmetric_pair() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::from_vec(2, 2, vec![0.3, 0.7, 0.3, 0.7]).unwrap()).unwrap();
        let w = tape.constant(Tensor::from_vec(2, 2, vec![1.0, -1.0, 2.0, 0.5]).unwrap()).unwrap();
        let adj = Arc::new(normalized_adjacency(2, &[(0, 1)]).unwrap());
        let out = gcn_layer(&mut tape, h, adj, w).unwrap();
        let o = tape.value(out).unwrap();
        assert_eq!(o.row_slice(0), o.row_slice(1));
    }

    #[test]
    fn gcn_path_of_three() {
        let mut tape = Tape::new();
        let hv = Tensor::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let h = tape.constant(hv).unwrap();
        let w = tape.constant(Tensor::scalar(1.0)).unwrap();
        let adj = Arc::new(normalized_adjacency(3, &[(0, 1), (1, 2)]).unwrap());
        let out = gcn_layer(&mut tape, h, adj, w).unwrap();
        let s = 1.0 / 6.0f64.sqrt();
        let want = [0.5 + 2.0 * s, s + 2.0 / 3.0 + 3.0 * s, 2.0 * s + 1.5];
        for (a, b) in tape.value(out).unwrap().data().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn induced_subgraph_reindexes() {
        let a = induced_adjacency(&[1, 3], &[(0, 1), (1, 3), (3, 2)], 4).unwrap().to_dense();
        assert!(a.data().iter().all(|x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn rejects_oversized_graph() {
        let cfg = ModelConfig { max_nodes: 2, d_model: 4, n_heads: 2, d_ff: 4, mlp_hidden: vec![], descriptor_dim: 90, ..ModelConfig::default() };
        let params = ModelParams::init(&cfg, 0).unwrap();
        let x = PreparedCircuit {
            circuit_id: 0,
            qubits: vec![0],
            features: Tensor::zeros(3, NODE_FEATURES),
            lightcones: vec![vec![0]],
            descriptors: vec![vec![0.0; 90]],
            edges: vec![],
        };
        assert_eq!(forward(&params, &x, LocalEvaluation::Gathered), Err(ModelError::TooManyNodes { n: 3, max: 2 }));
    }
}
