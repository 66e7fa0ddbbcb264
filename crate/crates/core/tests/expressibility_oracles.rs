mod common;

use std::f64::consts::TAU;

use common::haar_samples;

use pqcexpr::circuit::ParameterizedCircuit;
use pqcexpr::expressibility::{
    expressibility, expressibility_from_samples, haar_bin_probs, kl_divergence, sample_fidelities,
    EstimatorConfig, FidelityHistogram, FidelityMode,
};
use pqcexpr::sim::Simulator;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn config(num_samples: usize, seed: u64) -> EstimatorConfig {
    EstimatorConfig {
        num_samples,
        seed,
        ..EstimatorConfig::default()
    }
}

#[test]
fn zero_parameter_circuit_scores_ln_bins() {
    let c = ParameterizedCircuit::builder(1).x(0).build().unwrap();
    let est = expressibility(&c, "idle", &config(1000, 3), &Simulator::default()).unwrap();
    assert!((est.value - 75f64.ln()).abs() < 1e-9);
    assert!((est.value - 4.317488).abs() < 1e-6);
}

#[test]
fn haar_distributed_samples_score_near_zero() {
    for n in 1..=4 {
        let samples = haar_samples(n, 5000, 100 + n as u64);
        let (value, hist) = expressibility_from_samples(&samples, n, 75).unwrap();
        assert!(value < 0.02, "n={n}: {value}");
        assert_eq!(hist.counts.iter().sum::<u64>() as usize, 5000);
    }
}

#[test]
fn single_rx_mean_fidelity_matches_monte_carlo() {
    // independent oracle: closed-form overlap averaged over an unrelated
    // generator; the analytic mean of cos^2(delta/2) is 1/2
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let m = 100_000;
    let oracle = (0..m)
        .map(|_| {
            let d: f64 = rng.random_range(0.0..TAU) - rng.random_range(0.0..TAU);
            (d / 2.0).cos().powi(2)
        })
        .sum::<f64>()
        / m as f64;
    assert!((oracle - 0.5).abs() < 0.01);

    let c = ParameterizedCircuit::builder(1).rx(0).build().unwrap();
    let samples = sample_fidelities(&c, "rx", &config(m, 11), &Simulator::default()).unwrap();
    let mean = samples.iter().sum::<f64>() / m as f64;
    assert!((mean - oracle).abs() < 0.01, "mean {mean} oracle {oracle}");
}

#[test]
fn idle_circuit_is_less_expressive_than_rx() {
    let sim = Simulator::default();
    let cfg = config(2000, 9);
    let idle = ParameterizedCircuit::builder(1).x(0).build().unwrap();
    let rx = ParameterizedCircuit::builder(1).rx(0).build().unwrap();
    let a = expressibility(&idle, "a", &cfg, &sim).unwrap().value;
    let b = expressibility(&rx, "b", &cfg, &sim).unwrap().value;
    assert!(a > b, "{a} <= {b}");
}

#[test]
fn estimates_are_deterministic_in_both_modes() {
    let sim = Simulator::default();
    let c = ParameterizedCircuit::builder(2).ry(0).cx(0, 1).rx(1).build().unwrap();
    for mode in [FidelityMode::Exact, FidelityMode::Shots { shots: 512 }] {
        let cfg = EstimatorConfig { mode, ..config(300, 4) };
        let a = sample_fidelities(&c, "c", &cfg, &sim).unwrap();
        let b = sample_fidelities(&c, "c", &cfg, &sim).unwrap();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        let other = sample_fidelities(&c, "d", &cfg, &sim).unwrap();
        assert_ne!(a, other);
    }
}

#[test]
fn kl_hand_values() {
    let v = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
    assert!((v - 0.143841).abs() < 1e-6);
    let mut point = vec![0.0; 75];
    point[0] = 1.0;
    let uniform = vec![1.0 / 75.0; 75];
    assert!((kl_divergence(&point, &uniform).unwrap() - 4.317488).abs() < 1e-6);
}

proptest! {
    #[test]
    fn histogram_conserves_mass(samples in prop::collection::vec(0.0f64..=1.0, 1..500), bins in 2usize..100) {
        let h = FidelityHistogram::from_samples(&samples, bins).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<u64>() as usize, samples.len());
        prop_assert!((h.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(h.bin_edges.len(), bins + 1);
    }

    #[test]
    fn kl_against_haar_is_non_negative(samples in prop::collection::vec(0.0f64..=1.0, 1..300), n in 1usize..=4) {
        let (value, _) = expressibility_from_samples(&samples, n, 75).unwrap();
        prop_assert!(value >= 0.0);
    }

    #[test]
    fn haar_bins_form_a_distribution(bins in 2usize..200, n in 1usize..=4) {
        let q = haar_bin_probs(bins, n).unwrap().bin_probs;
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.iter().all(|&x| x > 0.0));
        prop_assert!(q.windows(2).all(|w| w[0] >= w[1] - 1e-15));
    }
}
