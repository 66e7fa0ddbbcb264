//! Expressibility as the KL divergence between a circuit's sampled
//! fidelity distribution and the Haar-random fidelity distribution.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::ParameterizedCircuit;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream_rng};
use crate::sim::Simulator;

pub const DEFAULT_NUM_SAMPLES: usize = 5000;
pub const DEFAULT_NUM_BINS: usize = 75;
pub const DEFAULT_SHOTS: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FidelityMode {
    Exact,
    Shots { shots: u64 },
}

/// Logarithm used for the KL value. Only the natural log is produced; the
/// field exists so labels record it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    Natural,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub num_samples: usize,
    pub num_bins: usize,
    pub mode: FidelityMode,
    pub seed: u64,
    #[serde(default)]
    pub log_base: LogBase,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            num_samples: DEFAULT_NUM_SAMPLES,
            num_bins: DEFAULT_NUM_BINS,
            mode: FidelityMode::Exact,
            seed: 0,
            log_base: LogBase::Natural,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::Config("num_samples must be positive".into()));
        }
        if self.num_bins < 2 {
            return Err(Error::Config("num_bins must be at least 2".into()));
        }
        if let FidelityMode::Shots { shots: 0 } = self.mode {
            return Err(Error::Config("shots must be positive".into()));
        }
        Ok(())
    }
}

/// Empirical fidelity distribution over `num_bins` uniform bins on `[0, 1]`.
/// Bin `i` covers `[i/B, (i+1)/B)`; the last bin is closed at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    pub num_samples: usize,
}

impl FidelityHistogram {
    pub fn from_samples(samples: &[f64], num_bins: usize) -> Result<Self> {
        if num_bins < 2 {
            return Err(Error::Config("num_bins must be at least 2".into()));
        }
        if samples.is_empty() {
            return Err(Error::Config("no fidelity samples".into()));
        }
        let mut counts = vec![0u64; num_bins];
        for &f in samples {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Numeric(format!("fidelity {f} outside [0, 1]")));
            }
            let bin = ((f * num_bins as f64) as usize).min(num_bins - 1);
            counts[bin] += 1;
        }
        let n = samples.len() as f64;
        Ok(FidelityHistogram {
            bin_edges: (0..=num_bins).map(|i| i as f64 / num_bins as f64).collect(),
            probabilities: counts.iter().map(|&c| c as f64 / n).collect(),
            counts,
            num_samples: samples.len(),
        })
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }
}

/// Haar fidelity mass per bin for an `N = 2^n` dimensional state space:
/// `q_i = (1 - F_i)^(N-1) - (1 - F_{i+1})^(N-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarReference {
    pub num_qubits: usize,
    pub bin_probs: Vec<f64>,
}

pub fn haar_bin_probs(num_bins: usize, num_qubits: usize) -> Result<HaarReference> {
    if num_bins < 2 {
        return Err(Error::Config("num_bins must be at least 2".into()));
    }
    if num_qubits == 0 || num_qubits > 30 {
        return Err(Error::Config(format!("unsupported qubit count {num_qubits}")));
    }
    let exponent = ((1u64 << num_qubits) - 1) as i32;
    // (B - i) / B is exact in the numerator, unlike 1 - i / B
    let survival = |i: usize| ((num_bins - i) as f64 / num_bins as f64).powi(exponent);
    let bin_probs: Vec<f64> = (0..num_bins).map(|i| survival(i) - survival(i + 1)).collect();
    if let Some(i) = bin_probs.iter().position(|&q| q <= 0.0) {
        return Err(Error::Numeric(format!(
            "Haar bin {i} underflows for {num_qubits} qubits and {num_bins} bins"
        )));
    }
    Ok(HaarReference {
        num_qubits,
        bin_probs,
    })
}

/// `sum_i p_i ln(p_i / q_i)` over bins with `p_i > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    for (name, d) in [("p", p), ("q", q)] {
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > 1e-9 || d.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Numeric(format!("{name} is not a probability vector (sum {s})")));
        }
    }
    if let Some(i) = q.iter().position(|&x| x <= 0.0) {
        return Err(Error::Numeric(format!("reference probability q[{i}] is not positive")));
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            kl += pi * (pi / qi).ln();
        }
    }
    if kl < -1e-12 {
        return Err(Error::Numeric(format!("negative KL divergence {kl}")));
    }
    Ok(kl.max(0.0))
}

/// Draws `config.num_samples` fidelities between pairs of uniformly random
/// parameter bindings. Sample `i` uses substream `i` of the seed derived from
/// `(config.seed, circuit_id)`.
pub fn sample_fidelities(
    circuit: &ParameterizedCircuit,
    circuit_id: &str,
    config: &EstimatorConfig,
    sim: &Simulator,
) -> Result<Vec<f64>> {
    config.validate()?;
    circuit.check()?;
    if circuit.num_params == 0 {
        return Ok(vec![1.0; config.num_samples]);
    }
    let seed = derive_seed(config.seed, circuit_id);
    let mut theta1 = vec![0.0; circuit.num_params];
    let mut theta2 = vec![0.0; circuit.num_params];
    (0..config.num_samples)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            theta1.iter_mut().for_each(|t| *t = rng.random_range(0.0..TAU));
            theta2.iter_mut().for_each(|t| *t = rng.random_range(0.0..TAU));
            match config.mode {
                FidelityMode::Exact => sim.fidelity_exact(circuit, &theta1, &theta2),
                FidelityMode::Shots { shots } => {
                    sim.fidelity_kernel_shots(circuit, &theta1, &theta2, shots, &mut rng)
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressibilityEstimate {
    pub value: f64,
    pub histogram: FidelityHistogram,
    pub config: EstimatorConfig,
    pub circuit_id: String,
}

/// KL divergence of a fidelity sample against the Haar reference for
/// `num_qubits`.
pub fn expressibility_from_samples(
    samples: &[f64],
    num_qubits: usize,
    num_bins: usize,
) -> Result<(f64, FidelityHistogram)> {
    let hist = FidelityHistogram::from_samples(samples, num_bins)?;
    let haar = haar_bin_probs(num_bins, num_qubits)?;
    let value = kl_divergence(&hist.probabilities, &haar.bin_probs)?;
    Ok((value, hist))
}

pub fn expressibility(
    circuit: &ParameterizedCircuit,
    circuit_id: &str,
    config: &EstimatorConfig,
    sim: &Simulator,
) -> Result<ExpressibilityEstimate> {
    let samples = sample_fidelities(circuit, circuit_id, config, sim)?;
    let (value, histogram) =
        expressibility_from_samples(&samples, circuit.num_qubits, config.num_bins)?;
    Ok(ExpressibilityEstimate {
        value,
        histogram,
        config: config.clone(),
        circuit_id: circuit_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_two_level_is_uniform() {
        let h = haar_bin_probs(4, 1).unwrap();
        for q in h.bin_probs {
            assert!((q - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_first_bin_two_qubits() {
        let h = haar_bin_probs(75, 2).unwrap();
        let expected = 1.0 - (74.0f64 / 75.0).powi(3);
        assert!((h.bin_probs[0] - expected).abs() < 1e-15);
        assert!((h.bin_probs[0] - 0.039469037).abs() < 1e-9);
    }

    #[test]
    fn haar_sums_to_one() {
        for qubits in 1..=4 {
            for bins in [2, 3, 10, 75, 200] {
                let h = haar_bin_probs(bins, qubits).unwrap();
                let s: f64 = h.bin_probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "{qubits} {bins}");
                assert!(h.bin_probs.iter().all(|&q| q > 0.0));
            }
        }
        assert!(haar_bin_probs(1, 2).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);

        let mut point = vec![0.0; 75];
        point[0] = 1.0;
        let uniform = vec![1.0 / 75.0; 75];
        assert!((kl_divergence(&point, &uniform).unwrap() - 75f64.ln()).abs() < 1e-12);

        let v = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((v - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn kl_errors() {
        assert!(kl_divergence(&[1.0], &[0.5, 0.5]).is_err());
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).is_err());
        assert!(kl_divergence(&[0.7, 0.7], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn histogram_edges_and_closure() {
        let h = FidelityHistogram::from_samples(&[0.0, 0.25, 0.5, 1.0], 4).unwrap();
        assert_eq!(h.counts, vec![1, 1, 1, 1]);
        assert_eq!(h.bin_edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(FidelityHistogram::from_samples(&[1.5], 4).is_err());
    }

    #[test]
    fn zero_param_circuit_is_point_mass() {
        let c = ParameterizedCircuit::builder(1).x(0).build().unwrap();
        let cfg = EstimatorConfig {
            num_samples: 200,
            ..Default::default()
        };
        let s = sample_fidelities(&c, "x", &cfg, &Simulator::default()).unwrap();
        assert!(s.iter().all(|&f| f == 1.0));
        let e = expressibility(&c, "x", &cfg, &Simulator::default()).unwrap();
        assert!((e.value - 75f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = EstimatorConfig {
            num_bins: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EstimatorConfig {
            mode: FidelityMode::Shots { shots: 0 },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_document_shape() {
        let cfg = EstimatorConfig {
            mode: FidelityMode::Shots { shots: 4096 },
            ..Default::default()
        };
        let v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(v["mode"]["type"], "shots");
        assert_eq!(v["mode"]["shots"], 4096);
        assert_eq!(v["log_base"], "e");
    }
}
