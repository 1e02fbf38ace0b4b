use std::collections::BTreeMap;

use crate::circuit::{Circuit, GateKind};
use crate::features::assemble_descriptor;
use crate::graph::{all_lightcones, build_graph, CircuitGraph, NodeKind};
use crate::numeric::Tensor;

use super::ModelError;

/// Per-node input width: kind one-hot (5), terminal flag, sin θ, cos θ,
/// normalized time index, measured-wire flag.
pub const NODE_FEATURES: usize = 10;

/// Deterministic node featurization. Gate `i` of `L` gates has time index
/// `i / (L − 1)` (0 for a single gate); terminals sit at 1.
pub fn node_features(g: &CircuitGraph) -> Tensor {
    let n = g.n_nodes();
    let measured = g.measured();
    let last = g.n_gates().saturating_sub(1).max(1) as f64;
    let mut t = Tensor::zeros(n, NODE_FEATURES);
    for (i, node) in g.nodes().iter().enumerate() {
        let row = &mut t.data_mut()[i * NODE_FEATURES..(i + 1) * NODE_FEATURES];
        match node {
            NodeKind::Gate(gate) => {
                if let Some(k) = gate.kind.native_index() {
                    row[k] = 1.0;
                }
                let theta = if gate.kind == GateKind::Rz { gate.angle.unwrap_or(0.0) } else { 0.0 };
                row[6] = theta.sin();
                row[7] = theta.cos();
                row[8] = i as f64 / last;
                row[9] = if gate.qubits.iter().any(|q| measured.contains(q)) { 1.0 } else { 0.0 };
            }
            NodeKind::Terminal(_) => {
                row[5] = 1.0;
                row[7] = 1.0;
                row[8] = 1.0;
                row[9] = 1.0;
            }
        }
    }
    t
}

/// Dense boolean masks (`N × N`, row-major): one local mask per measured
/// qubit allowing attention only among its lightcone nodes, and an
/// all-true global mask.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMasks {
    pub n_nodes: usize,
    pub local: Vec<Vec<bool>>,
    pub global: Vec<bool>,
}

pub fn attention_masks(n_nodes: usize, lightcones: &[Vec<usize>]) -> AttentionMasks {
    let local = lightcones
        .iter()
        .map(|cone| {
            let mut m = vec![false; n_nodes * n_nodes];
            for &i in cone {
                for &j in cone {
                    m[i * n_nodes + j] = true;
                }
            }
            m
        })
        .collect();
    AttentionMasks { n_nodes, local, global: vec![true; n_nodes * n_nodes] }
}

/// Everything the model reads from one circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCircuit {
    pub circuit_id: usize,
    /// Measured qubits in measurement order; predictions follow this order.
    pub qubits: Vec<usize>,
    pub features: Tensor,
    /// Lightcone node ids per measured qubit.
    pub lightcones: Vec<Vec<usize>>,
    pub descriptors: Vec<Vec<f64>>,
    /// Directed DAG edges; GCN layers treat them as undirected.
    pub edges: Vec<(usize, usize)>,
}

impl PreparedCircuit {
    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PreparedCircuit {
        let n = self.n_nodes();
        assert_eq!(perm.len(), n, "permutation length");
        let mut features = Tensor::zeros(n, self.features.cols());
        for (i, &p) in perm.iter().enumerate() {
            let c = self.features.cols();
            features.data_mut()[p * c..(p + 1) * c].copy_from_slice(self.features.row_slice(i));
        }
        PreparedCircuit {
            circuit_id: self.circuit_id,
            qubits: self.qubits.clone(),
            features,
            lightcones: self.lightcones.iter().map(|l| l.iter().map(|&v| perm[v]).collect()).collect(),
            descriptors: self.descriptors.clone(),
            edges: self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect(),
        }
    }
}

/// Builds the graph, lightcones, node features and descriptors of a native
/// measured circuit.
pub fn prepare_circuit(
    circuit_id: usize,
    circuit: &Circuit,
    noisy: &BTreeMap<usize, f64>,
) -> Result<PreparedCircuit, ModelError> {
    let g = build_graph(circuit)?;
    let qubits = g.measured().to_vec();
    let lightcones = all_lightcones(&g).into_iter().map(|m| m.nodes).collect();
    let descriptors = qubits
        .iter()
        .map(|&q| assemble_descriptor(circuit, q, noisy, &qubits).map(|d| d.to_vec()))
        .collect::<Result<_, _>>()?;
    Ok(PreparedCircuit {
        circuit_id,
        qubits,
        features: node_features(&g),
        lightcones,
        descriptors,
        edges: g.edges().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Basis;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn feature_rows() {
        let mut c = Circuit::new(2);
        c.push(GateKind::Sx, &[1], None);
        c.push(GateKind::Rz, &[0], Some(FRAC_PI_2));
        c.push(GateKind::Ecr, &[0, 1], None);
        c.measure(0, Basis::Z);
        let g = build_graph(&c).unwrap();
        let f = node_features(&g);
        assert_eq!(f.shape(), [4, NODE_FEATURES]);
        assert_eq!(f.row_slice(0), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let rz = f.row_slice(1);
        assert_eq!(rz[4], 1.0);
        assert!((rz[6] - 1.0).abs() < 1e-15 && rz[7].abs() < 1e-15);
        assert_eq!(rz[8], 0.5);
        assert_eq!(f.row_slice(2)[8], 1.0);
        assert_eq!(f.row_slice(3), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn masks() {
        let m = attention_masks(3, &[vec![0, 2]]);
        assert_eq!(m.local[0], vec![true, false, true, false, false, false, true, false, true]);
        assert!(m.global.iter().all(|&x| x));
    }
}
