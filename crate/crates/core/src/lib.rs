//! Expressibility of parameterized quantum circuits.
//!
//! The crate covers the whole pipeline: a small circuit model, an exact
//! statevector simulator, fidelity-histogram expressibility estimation
//! against the Haar distribution, random and RealAmplitudes circuit
//! generation, the circuit-to-graph encoding, and a GraphSAGE-style
//! regressor that predicts expressibility from the graph.

pub mod circuit;
pub mod error;
pub mod expressibility;
pub mod generate;
pub mod gnn;
pub mod graph;
pub mod pipeline;
pub mod seed;
pub mod sim;

pub use circuit::{CircuitStats, Gate, GateKind, ParameterizedCircuit, Violation};
pub use error::{Error, Result};
pub use expressibility::{
    expressibility, haar_bin_probs, kl_divergence, sample_fidelities, EstimatorConfig,
    ExpressibilityEstimate, FidelityHistogram, FidelityMode, HaarReference,
};
pub use generate::{
    generate_dataset, random_circuit, real_amplitudes, real_amplitudes_suite,
    EntanglementPattern, RandomGenConfig, RealAmpDescriptor,
};
pub use gnn::{
    huber_loss, predict, train, GnnModel, ModelConfig, Neighborhood, TrainConfig, TrainHistory,
};
pub use graph::{
    apply_normalizer, encode, fit_normalizer, global_features, CircuitGraph, NormStats,
    D_GLOBAL, D_NODE, MAX_QUBITS,
};
pub use sim::StateVector;
