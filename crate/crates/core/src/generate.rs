//! Circuit families: random layered circuits and RealAmplitudes ansatze.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Gate, GateKind, ParameterizedCircuit};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream_rng};

pub const DEFAULT_MAX_DEPTH: usize = 40;
const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomGenConfig {
    pub num_qubits: usize,
    pub max_depth: usize,
    pub num_reps: usize,
    pub seed: u64,
    pub single_qubit_kinds: Vec<GateKind>,
    /// Upper bound on consecutive CX gates per entangling block. `None`
    /// means `num_qubits`.
    pub max_cx_block: Option<usize>,
}

impl RandomGenConfig {
    pub fn new(num_qubits: usize, num_reps: usize, seed: u64) -> Self {
        RandomGenConfig {
            num_qubits,
            max_depth: DEFAULT_MAX_DEPTH,
            num_reps,
            seed,
            single_qubit_kinds: GateKind::SINGLE_QUBIT.to_vec(),
            max_cx_block: None,
        }
    }

    pub fn cx_block_limit(&self) -> usize {
        if self.num_qubits < 2 {
            0
        } else {
            self.max_cx_block.unwrap_or(self.num_qubits)
        }
    }

    /// Generator seeded from `self.seed`.
    pub fn rng(&self) -> ChaCha8Rng {
        stream_rng(self.seed, 0)
    }

    fn validate(&self) -> Result<()> {
        if self.num_qubits == 0 {
            return Err(Error::Config("num_qubits must be at least 1".into()));
        }
        if self.max_depth < 2 {
            return Err(Error::Config(format!(
                "max_depth {} cannot fit two single-qubit layers",
                self.max_depth
            )));
        }
        if self.num_reps == 0 {
            return Err(Error::Config("num_reps must be at least 1".into()));
        }
        if self.single_qubit_kinds.is_empty()
            || self.single_qubit_kinds.iter().any(|k| k.arity() != 1)
        {
            return Err(Error::Config("single_qubit_kinds must be non-empty single-qubit kinds".into()));
        }
        if self.num_qubits >= 2 && self.cx_block_limit() == 0 {
            return Err(Error::Config("max_cx_block must be at least 1".into()));
        }
        Ok(())
    }
}

fn push_single_layer(cfg: &RandomGenConfig, rng: &mut ChaCha8Rng, gates: &mut Vec<Gate>, next_param: &mut usize) {
    for q in 0..cfg.num_qubits {
        let kind = *cfg.single_qubit_kinds.choose(rng).expect("non-empty kinds");
        if kind.is_parameterized() {
            gates.push(Gate::rotation(kind, q, *next_param));
            *next_param += 1;
        } else {
            gates.push(Gate::fixed(kind, vec![q]));
        }
    }
}

fn draw_once(cfg: &RandomGenConfig, rng: &mut ChaCha8Rng) -> Result<ParameterizedCircuit> {
    let n = cfg.num_qubits;
    let mut gates = Vec::new();
    let mut next_param = 0;
    push_single_layer(cfg, rng, &mut gates, &mut next_param);
    for _ in 0..cfg.num_reps {
        let limit = cfg.cx_block_limit();
        if limit > 0 {
            let len = rng.random_range(1..=limit);
            for _ in 0..len {
                // uniform over the n(n-1) ordered pairs
                let pair = rng.random_range(0..n * (n - 1));
                let control = pair / (n - 1);
                let mut target = pair % (n - 1);
                if target >= control {
                    target += 1;
                }
                gates.push(Gate::cx(control, target));
            }
        }
        push_single_layer(cfg, rng, &mut gates, &mut next_param);
    }
    ParameterizedCircuit::new(n, gates)
}

/// Single-qubit layer, then `num_reps` times a random CX block followed by
/// another single-qubit layer. Draws exceeding `max_depth` are redrawn from
/// the continuing stream, up to 100 attempts.
pub fn random_circuit(cfg: &RandomGenConfig, rng: &mut ChaCha8Rng) -> Result<ParameterizedCircuit> {
    cfg.validate()?;
    for _ in 0..MAX_ATTEMPTS {
        let c = draw_once(cfg, rng)?;
        if c.stats()?.depth <= cfg.max_depth {
            return Ok(c);
        }
    }
    Err(Error::Config(format!(
        "no circuit within depth {} after {MAX_ATTEMPTS} attempts",
        cfg.max_depth
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCircuit {
    pub id: String,
    pub config: RandomGenConfig,
    pub circuit: ParameterizedCircuit,
}

pub fn random_circuit_id(index: usize) -> String {
    format!("rand-{index:06}")
}

/// Largest repetition count whose fully serialized depth stays within
/// `max_depth`.
pub fn max_reps(max_depth: usize, cx_block_limit: usize) -> usize {
    ((max_depth.saturating_sub(1)) / (cx_block_limit + 1)).max(1)
}

/// `count` random circuits. Circuit `i` is a pure function of
/// `(seed, i)`, so the result is independent of thread scheduling.
pub fn generate_dataset(
    count: usize,
    max_qubits: usize,
    max_depth: usize,
    seed: u64,
) -> Result<Vec<GeneratedCircuit>> {
    if max_qubits == 0 {
        return Err(Error::Config("max_qubits must be at least 1".into()));
    }
    if max_depth < 2 {
        return Err(Error::Config(format!("max_depth {max_depth} is below 2")));
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let id = random_circuit_id(i);
            let child = derive_seed(seed, &id);
            let mut draw = stream_rng(child, 0);
            let num_qubits = draw.random_range(1..=max_qubits);
            let mut cfg = RandomGenConfig::new(num_qubits, 1, child);
            cfg.max_depth = max_depth;
            cfg.num_reps = draw.random_range(1..=max_reps(max_depth, cfg.cx_block_limit()));
            let circuit = random_circuit(&cfg, &mut stream_rng(child, 1))?;
            Ok(GeneratedCircuit {
                id,
                config: cfg,
                circuit,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntanglementPattern {
    Full,
    Linear,
    Circular,
    Sca,
}

impl EntanglementPattern {
    pub const ALL: [EntanglementPattern; 4] = [
        EntanglementPattern::Full,
        EntanglementPattern::Linear,
        EntanglementPattern::Circular,
        EntanglementPattern::Sca,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntanglementPattern::Full => "full",
            EntanglementPattern::Linear => "linear",
            EntanglementPattern::Circular => "circular",
            EntanglementPattern::Sca => "sca",
        }
    }

    /// Ordered (control, target) pairs for repetition `rep` (0-based).
    ///
    /// Follows Qiskit's `get_entangler_map` for two-qubit blocks: circular
    /// prepends the wrap-around pair `(n-1, 0)` to the linear chain when
    /// `n > 2`; sca rotates the circular list right by `rep` and swaps
    /// control and target on odd repetitions.
    pub fn pairs(self, num_qubits: usize, rep: usize) -> Vec<(usize, usize)> {
        let n = num_qubits;
        let linear: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        let circular = || {
            if n > 2 {
                let mut c = vec![(n - 1, 0)];
                c.extend_from_slice(&linear);
                c
            } else {
                linear.clone()
            }
        };
        match self {
            EntanglementPattern::Full => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            EntanglementPattern::Linear => linear,
            EntanglementPattern::Circular => circular(),
            EntanglementPattern::Sca => {
                let c = circular();
                let len = c.len();
                // python slicing: c[-k:] + c[:-k], a no-op once k >= len
                let shifted: Vec<_> = if rep == 0 || rep >= len {
                    c
                } else {
                    c[len - rep..].iter().chain(&c[..len - rep]).copied().collect()
                };
                if rep % 2 == 1 {
                    shifted.into_iter().map(|(a, b)| (b, a)).collect()
                } else {
                    shifted
                }
            }
        }
    }
}

impl fmt::Display for EntanglementPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntanglementPattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown entanglement pattern {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RealAmpDescriptor {
    pub num_qubits: usize,
    pub reps: usize,
    pub pattern: EntanglementPattern,
    pub skip_final_rotation_layer: bool,
}

impl RealAmpDescriptor {
    pub fn id(&self) -> String {
        let suffix = if self.skip_final_rotation_layer { "-skipfinal" } else { "" };
        format!("ra-q{}-r{}-{}{}", self.num_qubits, self.reps, self.pattern, suffix)
    }

    pub fn build(&self) -> Result<ParameterizedCircuit> {
        real_amplitudes_with(self.num_qubits, self.reps, self.pattern, self.skip_final_rotation_layer)
    }
}

/// RY layer, then `reps` times a CX entangling block and another RY layer.
pub fn real_amplitudes(num_qubits: usize, reps: usize, pattern: EntanglementPattern) -> Result<ParameterizedCircuit> {
    real_amplitudes_with(num_qubits, reps, pattern, false)
}

pub fn real_amplitudes_with(
    num_qubits: usize,
    reps: usize,
    pattern: EntanglementPattern,
    skip_final_rotation_layer: bool,
) -> Result<ParameterizedCircuit> {
    if num_qubits < 2 {
        return Err(Error::Config("RealAmplitudes needs at least 2 qubits".into()));
    }
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let mut b = ParameterizedCircuit::builder(num_qubits);
    for q in 0..num_qubits {
        b = b.ry(q);
    }
    for rep in 0..reps {
        for (c, t) in pattern.pairs(num_qubits, rep) {
            b = b.cx(c, t);
        }
        if !(skip_final_rotation_layer && rep + 1 == reps) {
            for q in 0..num_qubits {
                b = b.ry(q);
            }
        }
    }
    b.build()
}

/// The 64-circuit validation suite: qubits {2, 3, 4} x reps 1..=4 x all
/// patterns, plus the 4-qubit set again without the final rotation layer.
pub fn real_amplitudes_suite() -> Vec<(RealAmpDescriptor, ParameterizedCircuit)> {
    let mut descriptors = Vec::with_capacity(64);
    for (num_qubits, skip) in [(2, false), (3, false), (4, false), (4, true)] {
        for reps in 1..=4 {
            for pattern in EntanglementPattern::ALL {
                descriptors.push(RealAmpDescriptor {
                    num_qubits,
                    reps,
                    pattern,
                    skip_final_rotation_layer: skip,
                });
            }
        }
    }
    descriptors
        .into_iter()
        .map(|d| {
            let c = d.build().expect("suite descriptors are valid");
            (d, c)
        })
        .collect()
}
