mod common;

use common::{is_acyclic, random, wire_gates, wire_walk};
use pqcexpr::circuit::{GateKind, ParameterizedCircuit};
use pqcexpr::graph::{apply_normalizer, encode, fit_normalizer, global_features, CircuitGraph, D_NODE};
use proptest::prelude::*;

#[test]
fn twenty_gate_four_qubit_graph() {
    let mut b = ParameterizedCircuit::builder(4);
    for i in 0..20 {
        b = if i % 3 == 2 { b.cx(i % 4, (i + 1) % 4) } else { b.ry(i % 4) };
    }
    let c = b.build().unwrap();
    let g = encode(&c, "twenty").unwrap();
    assert_eq!(g.num_nodes(), 28);
    for q in 0..4 {
        assert_eq!(wire_walk(&c, &g, q).unwrap(), wire_gates(&c, q));
    }
}

#[test]
fn structural_laws_on_random_circuits() {
    for seed in 0..300u64 {
        let c = random(1 + (seed % 4) as usize, 1 + (seed % 5) as usize, seed);
        let g = encode(&c, "r").unwrap();
        assert_eq!(g.num_nodes(), 2 * c.num_qubits + c.gates.len());
        assert_eq!(g.edges.len(), c.num_qubits + c.gates.iter().map(|x| x.qubits.len()).sum::<usize>());
        assert!(is_acyclic(&g));
        for q in 0..c.num_qubits {
            assert_eq!(wire_walk(&c, &g, q).unwrap(), wire_gates(&c, q));
        }
    }
}

#[test]
fn node_features_encode_type_and_qubits() {
    let c = random(4, 3, 12);
    let g = encode(&c, "f").unwrap();
    let n = c.num_qubits;
    for (i, gate) in c.gates.iter().enumerate() {
        let row = g.node_features.row(n + i);
        assert_eq!(row.iter().take(8).sum::<f64>(), 1.0);
        assert_eq!(row[2 + gate.kind.index()], 1.0);
        for q in 0..4 {
            assert_eq!(row[8 + q], if gate.qubits.contains(&q) { 1.0 } else { 0.0 });
        }
    }
    assert_eq!(g.node_features.ncols(), D_NODE);
}

#[test]
fn normalized_training_set_is_studentized() {
    let graphs: Vec<CircuitGraph> = (0..60).map(|s| encode(&random(1 + s % 4, 1 + s % 3, s as u64), "s").unwrap().with_label(s as f64)).collect();
    let stats = fit_normalizer(graphs.iter()).unwrap();
    let normed: Vec<CircuitGraph> = graphs.iter().map(|g| apply_normalizer(g, &stats).unwrap()).collect();
    let refit = fit_normalizer(normed.iter()).unwrap();
    for d in 0..D_NODE {
        assert!(refit.node_mean[d].abs() < 1e-9);
        if stats.node_std[d] > 1e-8 {
            assert!((refit.node_std[d] - 1.0).abs() < 1e-9, "node dim {d}: {}", refit.node_std[d]);
        }
    }
    for d in 0..refit.global_mean.len() {
        assert!(refit.global_mean[d].abs() < 1e-9);
        if stats.global_std[d] > 1e-8 {
            assert!((refit.global_std[d] - 1.0).abs() < 1e-9);
        }
    }
    for (a, b) in graphs.iter().zip(&normed) {
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.label, b.label);
    }
    let mut reversed = graphs.clone();
    reversed.reverse();
    let again = fit_normalizer(reversed.iter()).unwrap();
    for (x, y) in again.node_mean.iter().zip(&stats.node_mean) {
        assert!((x - y).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn gate_count_slots_sum_to_gate_total(n in 1usize..=4, reps in 1usize..6, seed in any::<u64>()) {
        let c = random(n, reps, seed);
        let f = global_features(&c).unwrap();
        prop_assert_eq!(f.iter().skip(4).sum::<f64>() as usize, c.gates.len());
        prop_assert_eq!(f[3] as usize, n);
        prop_assert_eq!(f[2] as usize, c.num_params);
        let cx = c.gates.iter().filter(|g| g.kind == GateKind::CX).count();
        prop_assert_eq!(f[9] as usize, cx);
    }

    #[test]
    fn encoding_is_deterministic(n in 1usize..=4, seed in any::<u64>()) {
        let c = random(n, 3, seed);
        prop_assert_eq!(encode(&c, "a").unwrap(), encode(&c, "a").unwrap());
    }
}
