//! Circuit-to-graph encoding and dataset-wide feature normalization.
//!
//! Nodes are ordered `[input 0..n, gates in list order, output 0..n]`.
//! Each qubit wire contributes a directed path input -> gates on that
//! qubit -> output, so a CX node sits on two paths. Two consecutive CX
//! gates on the same pair produce a repeated edge; the edge list is a
//! multiset.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::circuit::{GateKind, ParameterizedCircuit};
use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 4;
/// Node-type slots: INPUT, OUTPUT, then the six gate kinds.
pub const NUM_NODE_TYPES: usize = 8;
pub const D_NODE: usize = NUM_NODE_TYPES + MAX_QUBITS;
pub const D_GLOBAL: usize = 10;
pub const GRAPH_SCHEMA_VERSION: &str = "1";
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeType {
    Input,
    Output,
    Gate(GateKind),
}

impl NodeType {
    pub fn slot(self) -> usize {
        match self {
            NodeType::Input => 0,
            NodeType::Output => 1,
            NodeType::Gate(k) => 2 + k.index(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    pub circuit_id: String,
    /// `num_nodes x D_NODE`.
    pub node_features: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
    pub global_features: Array1<f64>,
    pub label: Option<f64>,
}

impl CircuitGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn with_label(mut self, label: f64) -> Self {
        self.label = Some(label);
        self
    }

    /// Debug dump: `{schema_version, nodes, edges, global, label}`.
    pub fn to_dump_json(&self) -> String {
        let dump = GraphDump {
            schema_version: GRAPH_SCHEMA_VERSION.to_string(),
            circuit_id: self.circuit_id.clone(),
            nodes: self.node_features.outer_iter().map(|r| r.to_vec()).collect(),
            edges: self.edges.clone(),
            global: self.global_features.to_vec(),
            label: self.label,
        };
        serde_json::to_string(&dump).expect("graph dump serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphDump {
    schema_version: String,
    circuit_id: String,
    nodes: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    global: Vec<f64>,
    label: Option<f64>,
}

fn check_width(circuit: &ParameterizedCircuit) -> Result<()> {
    if circuit.num_qubits > MAX_QUBITS {
        return Err(Error::Schema(format!(
            "circuit has {} qubits; the feature schema supports at most {MAX_QUBITS}",
            circuit.num_qubits
        )));
    }
    Ok(())
}

/// `[depth, width, num_param_gates, num_qubits, count_X, count_SX,
/// count_RX, count_RY, count_RZ, count_CX]`.
pub fn global_features(circuit: &ParameterizedCircuit) -> Result<Array1<f64>> {
    let s = circuit.stats()?;
    let mut v = vec![
        s.depth as f64,
        s.width as f64,
        s.num_params as f64,
        s.num_qubits as f64,
    ];
    v.extend(GateKind::ALL.iter().map(|&k| s.count(k) as f64));
    Ok(Array1::from(v))
}

pub fn encode(circuit: &ParameterizedCircuit, circuit_id: &str) -> Result<CircuitGraph> {
    circuit.check()?;
    check_width(circuit)?;
    let n = circuit.num_qubits;
    let g = circuit.gates.len();
    let num_nodes = 2 * n + g;
    let mut x = Array2::zeros((num_nodes, D_NODE));
    let mut set = |node: usize, ty: NodeType, qubits: &[usize]| {
        x[[node, ty.slot()]] = 1.0;
        for &q in qubits {
            x[[node, NUM_NODE_TYPES + q]] = 1.0;
        }
    };
    for q in 0..n {
        set(q, NodeType::Input, &[q]);
        set(n + g + q, NodeType::Output, &[q]);
    }
    let mut last: Vec<usize> = (0..n).collect();
    let mut edges = Vec::with_capacity(2 * g + n);
    for (i, gate) in circuit.gates.iter().enumerate() {
        let node = n + i;
        set(node, NodeType::Gate(gate.kind), &gate.qubits);
        for &q in &gate.qubits {
            edges.push((last[q], node));
            last[q] = node;
        }
    }
    for (q, &prev) in last.iter().enumerate() {
        edges.push((prev, n + g + q));
    }
    Ok(CircuitGraph {
        circuit_id: circuit_id.to_string(),
        node_features: x,
        edges,
        global_features: global_features(circuit)?,
        label: None,
    })
}

/// Per-dimension moments fitted on a training set; applied to both node and
/// global features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub node_mean: Vec<f64>,
    pub node_std: Vec<f64>,
    pub global_mean: Vec<f64>,
    pub global_std: Vec<f64>,
}

impl NormStats {
    pub fn identity() -> Self {
        NormStats {
            node_mean: vec![0.0; D_NODE],
            node_std: vec![1.0; D_NODE],
            global_mean: vec![0.0; D_GLOBAL],
            global_std: vec![1.0; D_GLOBAL],
        }
    }

    pub fn check(&self) -> Result<()> {
        let dims = [
            (self.node_mean.len(), D_NODE),
            (self.node_std.len(), D_NODE),
            (self.global_mean.len(), D_GLOBAL),
            (self.global_std.len(), D_GLOBAL),
        ];
        if dims.iter().any(|(a, b)| a != b) {
            return Err(Error::Schema("normalization statistics have the wrong dimensions".into()));
        }
        if self.node_std.iter().chain(&self.global_std).any(|&s| s.is_nan() || s < STD_FLOOR) {
            return Err(Error::Schema("normalization std below floor".into()));
        }
        Ok(())
    }
}

/// Population mean and std over rows, with std floored at [`STD_FLOOR`].
fn moments<'a>(rows: impl Iterator<Item = ndarray::ArrayView1<'a, f64>>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut count = 0usize;
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let rows: Vec<_> = rows.collect();
    for r in &rows {
        count += 1;
        for (s, &v) in sum.iter_mut().zip(r.iter()) {
            *s += v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    for r in &rows {
        for ((acc, &v), m) in sq.iter_mut().zip(r.iter()).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    let std = sq
        .iter()
        .map(|s| (s / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    (mean, std)
}

pub fn fit_normalizer<'a, I>(graphs: I) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a CircuitGraph>,
    I::IntoIter: Clone,
{
    let graphs = graphs.into_iter();
    if graphs.clone().next().is_none() {
        return Err(Error::Data("cannot fit normalizer on an empty set".into()));
    }
    let (node_mean, node_std) = moments(
        graphs.clone().flat_map(|g| g.node_features.axis_iter(Axis(0))),
        D_NODE,
    );
    let (global_mean, global_std) = moments(graphs.map(|g| g.global_features.view()), D_GLOBAL);
    Ok(NormStats {
        node_mean,
        node_std,
        global_mean,
        global_std,
    })
}

pub fn apply_normalizer(graph: &CircuitGraph, stats: &NormStats) -> Result<CircuitGraph> {
    stats.check()?;
    if graph.node_features.ncols() != D_NODE || graph.global_features.len() != D_GLOBAL {
        return Err(Error::Schema("graph features do not match the schema".into()));
    }
    let mut out = graph.clone();
    for mut row in out.node_features.axis_iter_mut(Axis(0)) {
        for ((v, m), s) in row.iter_mut().zip(&stats.node_mean).zip(&stats.node_std) {
            *v = (*v - m) / s;
        }
    }
    for ((v, m), s) in out
        .global_features
        .iter_mut()
        .zip(&stats.global_mean)
        .zip(&stats.global_std)
    {
        *v = (*v - m) / s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_graph() {
        let c = ParameterizedCircuit::builder(1).rx(0).build().unwrap();
        let g = encode(&c, "c").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
        let rx = g.node_features.row(1);
        assert_eq!(rx[NodeType::Gate(GateKind::RX).slot()], 1.0);
        assert_eq!(rx[NUM_NODE_TYPES], 1.0);
        assert_eq!(rx.sum(), 2.0);
        assert_eq!(g.node_features.row(0)[NodeType::Input.slot()], 1.0);
        assert_eq!(g.node_features.row(2)[NodeType::Output.slot()], 1.0);
    }

    #[test]
    fn cx_wiring() {
        let c = ParameterizedCircuit::builder(2).cx(0, 1).build().unwrap();
        let g = encode(&c, "c").unwrap();
        assert_eq!(g.num_nodes(), 5);
        let mut e = g.edges.clone();
        e.sort();
        assert_eq!(e, vec![(0, 2), (1, 2), (2, 3), (2, 4)]);
        let cx = g.node_features.row(2);
        assert_eq!(cx.slice(ndarray::s![NUM_NODE_TYPES..]).sum(), 2.0);
    }

    #[test]
    fn global_examples() {
        let c = ParameterizedCircuit::builder(1).rx(0).build().unwrap();
        assert_eq!(global_features(&c).unwrap().to_vec(), vec![1., 1., 1., 1., 0., 0., 1., 0., 0., 0.]);
        let c = ParameterizedCircuit::builder(2).rx(0).ry(1).cx(0, 1).build().unwrap();
        assert_eq!(global_features(&c).unwrap().to_vec(), vec![2., 2., 2., 2., 0., 0., 1., 1., 0., 1.]);
    }

    #[test]
    fn five_qubits_is_schema_error() {
        let c = ParameterizedCircuit::builder(5).rx(4).build().unwrap();
        assert!(matches!(encode(&c, "c"), Err(Error::Schema(_))));
    }

    #[test]
    fn degenerate_variance_floors() {
        let c = ParameterizedCircuit::builder(1).build().unwrap();
        let mut g = encode(&c, "c").unwrap();
        g.node_features.fill(0.5);
        let s = fit_normalizer([&g]).unwrap();
        assert!(s.node_std.iter().all(|&v| v == STD_FLOOR));
        assert!(s.node_mean.iter().all(|&v| v == 0.5));
        assert!(fit_normalizer(std::iter::empty::<&CircuitGraph>().collect::<Vec<_>>().iter().copied()).is_err());
    }

    #[test]
    fn hand_computed_moments() {
        // two 3-node graphs; column 0 values 0,1,2 and 3,4,5 -> mean 2.5,
        // population variance 35/12
        let c = ParameterizedCircuit::builder(1).x(0).build().unwrap();
        let mut a = encode(&c, "a").unwrap();
        let mut b = encode(&c, "b").unwrap();
        for i in 0..3 {
            a.node_features[[i, 0]] = i as f64;
            b.node_features[[i, 0]] = 3.0 + i as f64;
        }
        let s = fit_normalizer([&a, &b]).unwrap();
        assert!((s.node_mean[0] - 2.5).abs() < 1e-15);
        assert!((s.node_std[0] - (35.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let r = fit_normalizer([&b, &a]).unwrap();
        for (x, y) in s.node_mean.iter().zip(&r.node_mean) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_stats_and_structure_preserved() {
        let c = ParameterizedCircuit::builder(2).rx(0).cx(1, 0).build().unwrap();
        let g = encode(&c, "c").unwrap().with_label(0.7);
        let h = apply_normalizer(&g, &NormStats::identity()).unwrap();
        assert_eq!(g, h);
        let s = fit_normalizer([&g]).unwrap();
        let h = apply_normalizer(&g, &s).unwrap();
        assert_eq!(h.edges, g.edges);
        assert_eq!(h.label, Some(0.7));
    }

    #[test]
    fn dump_has_schema_fields() {
        let c = ParameterizedCircuit::builder(1).rx(0).build().unwrap();
        let v: serde_json::Value = serde_json::from_str(&encode(&c, "c").unwrap().to_dump_json()).unwrap();
        for k in ["schema_version", "nodes", "edges", "global", "label"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
