//! Oracles shared by several integration test targets.
#![allow(dead_code)]

use pqcexpr::circuit::ParameterizedCircuit;
use pqcexpr::generate::{random_circuit, RandomGenConfig};
use pqcexpr::gnn::{Batch, GnnModel, ModelConfig, Neighborhood};
use pqcexpr::graph::{apply_normalizer, encode, fit_normalizer, CircuitGraph};
use pqcexpr::seed::stream_rng;
use rand::Rng;

pub const FD_EPS: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_TOL: f64 = 1e-7;

pub fn random(n: usize, reps: usize, seed: u64) -> ParameterizedCircuit {
    let cfg = RandomGenConfig::new(n, reps, seed);
    random_circuit(&cfg, &mut cfg.rng()).unwrap()
}

pub fn small_config(seed: u64, neighborhood: Neighborhood) -> ModelConfig {
    ModelConfig {
        d_hidden: 6,
        d_global_hidden: 5,
        d_head_hidden: 4,
        neighborhood,
        init_seed: seed,
        ..ModelConfig::default()
    }
}

/// `count` normalized graphs with random labels in [-3, 3).
pub fn random_graphs(seed: u64, count: usize) -> Vec<CircuitGraph> {
    let mut rng = stream_rng(seed, 7);
    let raw: Vec<CircuitGraph> = (0..count)
        .map(|i| {
            let c = random(rng.random_range(1..=4), rng.random_range(1..=3), seed ^ i as u64);
            encode(&c, &format!("g{i}")).unwrap().with_label(rng.random_range(-3.0..3.0))
        })
        .collect();
    let stats = fit_normalizer(raw.iter()).unwrap();
    raw.iter().map(|g| apply_normalizer(g, &stats).unwrap()).collect()
}

pub fn perturb_biases(model: &mut GnnModel, seed: u64) {
    let mut rng = stream_rng(seed, 99);
    for (name, mut t) in model.weights.tensors_mut() {
        if name.ends_with(".b") || name.ends_with(".bias") {
            t.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
    }
}

fn nudge(model: &mut GnnModel, name: &str, k: usize, delta: f64) {
    for (n, mut t) in model.weights.tensors_mut() {
        if n == name {
            *t.iter_mut().nth(k).unwrap() += delta;
        }
    }
}

/// Compares every analytic gradient entry with a central difference.
/// Returns the number of entries checked, or the first mismatch.
pub fn gradient_check(model: &mut GnnModel, batch: &Batch, wd: f64) -> Result<usize, String> {
    let (_, grads) = model.loss_and_gradients(batch, wd).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(name, t)| (name, t.iter().copied().collect()))
        .collect();
    let mut checked = 0;
    for (name, expected) in analytic {
        for (k, &a) in expected.iter().enumerate() {
            nudge(model, &name, k, FD_EPS);
            let up = model.objective(batch, wd).unwrap();
            nudge(model, &name, k, -2.0 * FD_EPS);
            let down = model.objective(batch, wd).unwrap();
            nudge(model, &name, k, FD_EPS);
            let numeric = (up - down) / (2.0 * FD_EPS);
            let diff = (a - numeric).abs();
            let rel = diff / a.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
            if !(diff < FD_ABS_TOL || rel < FD_REL_TOL) {
                return Err(format!("{name}[{k}]: analytic {a:e} numeric {numeric:e}"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn successors(g: &CircuitGraph) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); g.num_nodes()];
    for &(a, b) in &g.edges {
        out[a].push(b);
    }
    out
}

/// Follows wire `q` from its input node through the graph edges, checking
/// each hop against the next gate on that wire from a brute-force scan of
/// the gate list. Returns the gate indices visited.
pub fn wire_walk(c: &ParameterizedCircuit, g: &CircuitGraph, q: usize) -> Result<Vec<usize>, String> {
    let n = c.num_qubits;
    let succ = successors(g);
    let on_wire: Vec<usize> = (0..c.gates.len()).filter(|&i| c.gates[i].qubits.contains(&q)).collect();
    let mut visited = Vec::new();
    let mut node = q;
    loop {
        let next_gate = on_wire.get(visited.len()).map(|&i| n + i);
        let target = next_gate.unwrap_or(n + c.gates.len() + q);
        if !succ[node].contains(&target) {
            return Err(format!("wire {q}: no edge {node} -> {target}"));
        }
        if next_gate.is_none() {
            return Ok(visited);
        }
        visited.push(target - n);
        node = target;
    }
}

pub fn wire_gates(c: &ParameterizedCircuit, q: usize) -> Vec<usize> {
    (0..c.gates.len()).filter(|&i| c.gates[i].qubits.contains(&q)).collect()
}

/// Kahn's algorithm; true iff every node gets ordered.
pub fn is_acyclic(g: &CircuitGraph) -> bool {
    let succ = successors(g);
    let mut indeg = vec![0; g.num_nodes()];
    for &(_, b) in &g.edges {
        indeg[b] += 1;
    }
    let mut ready: Vec<usize> = (0..g.num_nodes()).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(w);
            }
        }
    }
    seen == g.num_nodes()
}

/// Relabels nodes by `perm` (old index -> new index), also reordering the
/// edge list.
pub fn permute(g: &CircuitGraph, perm: &[usize]) -> CircuitGraph {
    let mut x = g.node_features.clone();
    for (old, &new) in perm.iter().enumerate() {
        x.row_mut(new).assign(&g.node_features.row(old));
    }
    let mut edges: Vec<(usize, usize)> = g.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    edges.reverse();
    CircuitGraph {
        node_features: x,
        edges,
        ..g.clone()
    }
}

/// Fidelities distributed exactly as for Haar-random states on `n` qubits,
/// by inverting the CDF `1 - (1 - F)^(N - 1)`.
pub fn haar_samples(n: usize, count: usize, seed: u64) -> Vec<f64> {
    use rand::SeedableRng;
    let dim = (1u64 << n) as f64;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| 1.0 - rng.random::<f64>().powf(1.0 / (dim - 1.0)))
        .collect()
}
