//! Gate-instance DAG of a circuit with explicit measurement terminals,
//! causal lightcones of measured qubits, and lightcone locality metrics.

mod locality;

use std::collections::VecDeque;

use thiserror::Error;

use crate::circuit::{Circuit, GateInstance};

pub use locality::{locality_metrics, LocalityReport, QubitLocality};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph construction needs a native circuit")]
    NotNative,
    #[error("circuit has no measured qubits")]
    NoMeasurements,
    #[error("qubit {0} is not measured")]
    NotMeasured(usize),
    #[error("mask references node {node} but the graph has {n_nodes} nodes")]
    UnknownNode { node: usize, n_nodes: usize },
    #[error("masks do not cover measured qubit {0}")]
    MissingMask(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Gate(GateInstance),
    /// Measurement of the given qubit.
    Terminal(usize),
}

/// Directed acyclic graph over gate instances plus one terminal per
/// measured qubit. Edge `u → v` exists iff `v` is the next node on one of
/// `u`'s wires; a wire's final gate points at that wire's terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    nodes: Vec<NodeKind>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    measured: Vec<usize>,
    n_qubits: usize,
    n_gates: usize,
}

impl CircuitGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_gates(&self) -> usize {
        self.n_gates
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn nodes(&self) -> &[NodeKind] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &NodeKind {
        &self.nodes[id]
    }

    /// Directed edges in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, id: usize) -> &[usize] {
        &self.preds[id]
    }

    pub fn successors(&self, id: usize) -> &[usize] {
        &self.succs[id]
    }

    /// Measured qubits in declaration order.
    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn terminal(&self, qubit: usize) -> Option<usize> {
        self.measured.iter().position(|&q| q == qubit).map(|i| self.n_gates + i)
    }

    /// Kahn's algorithm; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..self.n_nodes()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n_nodes());
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &self.succs[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        (order.len() == self.n_nodes()).then_some(order)
    }

    /// Undirected adjacency lists without self loops.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }
}

/// Builds the gate-instance DAG. Gate nodes keep circuit order; terminals
/// follow in measurement order.
pub fn build_graph(c: &Circuit) -> Result<CircuitGraph, GraphError> {
    if !c.is_native() {
        return Err(GraphError::NotNative);
    }
    if c.measured.is_empty() {
        return Err(GraphError::NoMeasurements);
    }
    let n_gates = c.gates.len();
    let n_nodes = n_gates + c.measured.len();
    let mut g = CircuitGraph {
        nodes: Vec::with_capacity(n_nodes),
        edges: Vec::new(),
        preds: vec![Vec::new(); n_nodes],
        succs: vec![Vec::new(); n_nodes],
        measured: c.measured_qubits(),
        n_qubits: c.n_qubits,
        n_gates,
    };
    let mut last: Vec<Option<usize>> = vec![None; c.n_qubits];
    let add_edge = |g: &mut CircuitGraph, u: usize, v: usize| {
        if !g.succs[u].contains(&v) {
            g.succs[u].push(v);
            g.preds[v].push(u);
            g.edges.push((u, v));
        }
    };
    for (v, gate) in c.gates.iter().enumerate() {
        g.nodes.push(NodeKind::Gate(gate.clone()));
        for &q in &gate.qubits {
            if let Some(u) = last[q] {
                add_edge(&mut g, u, v);
            }
            last[q] = Some(v);
        }
    }
    for (i, m) in c.measured.iter().enumerate() {
        let t = n_gates + i;
        g.nodes.push(NodeKind::Terminal(m.qubit));
        if let Some(u) = last[m.qubit] {
            add_edge(&mut g, u, t);
        }
    }
    Ok(g)
}

/// Causal cone of one measurement: every node from which the qubit's
/// terminal is reachable, the terminal included. Node ids are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct LightconeMask {
    pub qubit: usize,
    pub nodes: Vec<usize>,
}

impl LightconeMask {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// Dense membership vector over `n_nodes`.
    pub fn membership(&self, n_nodes: usize) -> Vec<bool> {
        let mut m = vec![false; n_nodes];
        for &v in &self.nodes {
            m[v] = true;
        }
        m
    }
}

pub fn lightcone(g: &CircuitGraph, qubit: usize) -> Result<LightconeMask, GraphError> {
    let terminal = g.terminal(qubit).ok_or(GraphError::NotMeasured(qubit))?;
    let mut seen = vec![false; g.n_nodes()];
    let mut stack = vec![terminal];
    seen[terminal] = true;
    while let Some(v) = stack.pop() {
        for &u in g.predecessors(v) {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    let nodes = seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect();
    Ok(LightconeMask { qubit, nodes })
}

/// Lightcones of every measured qubit, in measurement order.
pub fn all_lightcones(g: &CircuitGraph) -> Vec<LightconeMask> {
    g.measured()
        .iter()
        .map(|&q| lightcone(g, q).expect("measured qubit has a terminal"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Basis, GateKind};

    #[test]
    fn single_gate() {
        let mut c = Circuit::new(1);
        c.push(GateKind::X, &[0], None);
        c.measure(0, Basis::Z);
        let g = build_graph(&c).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert!(matches!(g.node(1), NodeKind::Terminal(0)));
    }

    #[test]
    fn ecr_joins_two_wires() {
        let mut c = Circuit::new(2);
        c.push(GateKind::X, &[0], None);
        c.push(GateKind::X, &[1], None);
        c.push(GateKind::Ecr, &[0, 1], None);
        c.measure(0, Basis::Z);
        let g = build_graph(&c).unwrap();
        let mut preds = g.predecessors(2).to_vec();
        preds.sort();
        assert_eq!(preds, vec![0, 1]);
        assert_eq!(g.successors(2), &[3]);
    }

    #[test]
    fn parallel_wires_deduplicated() {
        let mut c = Circuit::new(2);
        c.push(GateKind::Ecr, &[0, 1], None);
        c.push(GateKind::Ecr, &[1, 0], None);
        c.measure(0, Basis::Z);
        c.measure(1, Basis::Z);
        let g = build_graph(&c).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (1, 3)]);
    }

    #[test]
    fn rejects_unmeasured_and_logical() {
        let mut c = Circuit::new(1);
        c.push(GateKind::X, &[0], None);
        assert_eq!(build_graph(&c), Err(GraphError::NoMeasurements));
        c.push(GateKind::Rx, &[0], Some(0.1));
        c.measure(0, Basis::Z);
        assert_eq!(build_graph(&c), Err(GraphError::NotNative));
    }

    #[test]
    fn chain_lightcone_is_everything() {
        let mut c = Circuit::new(1);
        for _ in 0..5 {
            c.push(GateKind::Sx, &[0], None);
        }
        c.measure(0, Basis::Z);
        let g = build_graph(&c).unwrap();
        assert_eq!(lightcone(&g, 0).unwrap().nodes, (0..6).collect::<Vec<_>>());
        assert_eq!(lightcone(&g, 1), Err(GraphError::NotMeasured(1)));
    }

    #[test]
    fn disjoint_wires() {
        let mut c = Circuit::new(2);
        c.push(GateKind::Sx, &[0], None);
        c.push(GateKind::Sx, &[1], None);
        c.push(GateKind::X, &[0], None);
        c.push(GateKind::X, &[1], None);
        c.measure(0, Basis::Z);
        c.measure(1, Basis::Z);
        let g = build_graph(&c).unwrap();
        assert_eq!(lightcone(&g, 0).unwrap().nodes, vec![0, 2, 4]);
        assert_eq!(lightcone(&g, 1).unwrap().nodes, vec![1, 3, 5]);
    }

    #[test]
    fn coupled_chain_excludes_later_partner_gates() {
        // q1: sx(0) x(1) | ecr(2) | sx(3) x(4); q0: rz(5) after the coupling
        let mut c = Circuit::new(2);
        c.push(GateKind::Sx, &[1], None);
        c.push(GateKind::X, &[1], None);
        c.push(GateKind::Ecr, &[0, 1], None);
        c.push(GateKind::Sx, &[1], None);
        c.push(GateKind::X, &[1], None);
        c.push(GateKind::Rz, &[0], Some(0.2));
        c.measure(0, Basis::Z);
        let g = build_graph(&c).unwrap();
        assert_eq!(lightcone(&g, 0).unwrap().nodes, vec![0, 1, 2, 5, 6]);
    }

    #[test]
    fn terminal_without_gates() {
        let mut c = Circuit::new(2);
        c.push(GateKind::X, &[0], None);
        c.measure(1, Basis::Z);
        let g = build_graph(&c).unwrap();
        assert_eq!(lightcone(&g, 1).unwrap().nodes, vec![1]);
        assert!(g.topological_order().is_some());
    }
}
