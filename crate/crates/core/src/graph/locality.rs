use super::{CircuitGraph, GraphError, LightconeMask};

#[derive(Debug, Clone, PartialEq)]
pub struct QubitLocality {
    pub qubit: usize,
    pub coverage: f64,
    pub internal_frac: f64,
    pub boundary: f64,
    /// Edges with at least one endpoint in the mask; both fractions are 0
    /// when this is 0.
    pub touching_edges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub n_nodes: usize,
    pub n_measured: usize,
    pub per_qubit: Vec<QubitLocality>,
    /// `jaccard[i][j]` between the i-th and j-th measured qubits' masks.
    pub jaccard: Vec<Vec<f64>>,
}

impl LocalityReport {
    pub fn mean_coverage(&self) -> f64 {
        mean(self.per_qubit.iter().map(|q| q.coverage))
    }

    pub fn mean_internal_frac(&self) -> f64 {
        mean(self.per_qubit.iter().map(|q| q.internal_frac))
    }

    pub fn mean_boundary(&self) -> f64 {
        mean(self.per_qubit.iter().map(|q| q.boundary))
    }

    /// Mean over distinct pairs; `None` with fewer than two measured qubits.
    pub fn mean_pairwise_jaccard(&self) -> Option<f64> {
        let m = self.jaccard.len();
        if m < 2 {
            return None;
        }
        let pairs = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j)));
        Some(mean(pairs.map(|(i, j)| self.jaccard[i][j])))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Coverage, internal-edge fraction and boundary ratio per mask (edges
/// taken as undirected pairs), plus the pairwise Jaccard matrix.
pub fn locality_metrics(g: &CircuitGraph, masks: &[LightconeMask]) -> Result<LocalityReport, GraphError> {
    let n = g.n_nodes();
    for m in masks {
        if let Some(&bad) = m.nodes.iter().find(|&&v| v >= n) {
            return Err(GraphError::UnknownNode { node: bad, n_nodes: n });
        }
    }
    for &q in g.measured() {
        if !masks.iter().any(|m| m.qubit == q) {
            return Err(GraphError::MissingMask(q));
        }
    }
    let members: Vec<Vec<bool>> = masks.iter().map(|m| m.membership(n)).collect();
    let per_qubit = masks
        .iter()
        .zip(&members)
        .map(|(m, inside)| {
            let (mut internal, mut crossing) = (0usize, 0usize);
            for &(u, v) in g.edges() {
                match (inside[u], inside[v]) {
                    (true, true) => internal += 1,
                    (true, false) | (false, true) => crossing += 1,
                    _ => {}
                }
            }
            let touching = internal + crossing;
            let (internal_frac, boundary) = if touching == 0 {
                (0.0, 0.0)
            } else {
                (internal as f64 / touching as f64, crossing as f64 / touching as f64)
            };
            QubitLocality {
                qubit: m.qubit,
                coverage: m.len() as f64 / n as f64,
                internal_frac,
                boundary,
                touching_edges: touching,
            }
        })
        .collect();
    let k = masks.len();
    let mut jaccard = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let inter = (0..n).filter(|&v| members[i][v] && members[j][v]).count();
            let union = (0..n).filter(|&v| members[i][v] || members[j][v]).count();
            let val = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            jaccard[i][j] = val;
            jaccard[j][i] = val;
        }
    }
    Ok(LocalityReport { n_nodes: n, n_measured: g.measured().len(), per_qubit, jaccard })
}
