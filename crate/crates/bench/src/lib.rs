//! Fixtures shared by the benchmarks.

use pqcexpr::generate::{random_circuit, RandomGenConfig};
use pqcexpr::gnn::{Batch, Neighborhood};
use pqcexpr::graph::{encode, CircuitGraph};
use pqcexpr::ParameterizedCircuit;

/// A seeded random layered circuit.
pub fn circuit(num_qubits: usize, reps: usize, seed: u64) -> ParameterizedCircuit {
    let cfg = RandomGenConfig::new(num_qubits, reps, seed);
    random_circuit(&cfg, &mut cfg.rng()).expect("feasible config")
}

/// `count` labeled graphs of mixed width.
pub fn graphs(count: usize) -> Vec<CircuitGraph> {
    (0..count as u64)
        .map(|s| {
            let c = circuit(1 + (s % 4) as usize, 1 + (s % 5) as usize, s);
            encode(&c, "bench").expect("width within cap").with_label(0.1)
        })
        .collect()
}

pub fn batch(graphs: &[CircuitGraph]) -> Batch {
    let refs: Vec<&CircuitGraph> = graphs.iter().collect();
    Batch::new(&refs, Neighborhood::Symmetrized).expect("consistent graphs")
}
