//! Dense statevector simulation for the six-gate set.
//!
//! Qubit `q` is bit `q` of the basis-state index (little-endian), so
//! `|q0=1, q1=0>` is index 1.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::circuit::{Gate, GateKind, ParameterizedCircuit};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_QUBITS: usize = 4;

/// Tolerance beyond which a fidelity outside `[0, 1]` is treated as a bug
/// rather than rounding.
const FIDELITY_SLACK: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// Dense unitary of a gate, row-major. 2x2 for single-qubit kinds, 4x4 for
/// CX with the control as the high bit of the local index.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl GateMatrix {
    pub fn new(kind: GateKind, angle: Option<f64>) -> Result<Self> {
        if kind == GateKind::CX {
            check_angle(kind, angle)?;
            let mut data = vec![ZERO; 16];
            data[0] = ONE;
            data[5] = ONE;
            data[11] = ONE;
            data[14] = ONE;
            return Ok(GateMatrix { dim: 4, data });
        }
        let m = single_qubit_matrix(kind, angle)?;
        Ok(GateMatrix {
            dim: 2,
            data: vec![m[0][0], m[0][1], m[1][0], m[1][1]],
        })
    }

    /// Largest elementwise deviation of `U U^dagger` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.data[i * n + k] * self.data[j * n + k].conj();
                }
                let expected = if i == j { ONE } else { ZERO };
                worst = worst.max((acc - expected).norm());
            }
        }
        worst
    }
}

fn check_angle(kind: GateKind, angle: Option<f64>) -> Result<()> {
    match (kind.is_parameterized(), angle) {
        (true, None) => Err(Error::Simulation(format!("{kind} requires an angle"))),
        (false, Some(_)) => Err(Error::Simulation(format!("{kind} takes no angle"))),
        (true, Some(a)) if !a.is_finite() => {
            Err(Error::Simulation(format!("non-finite angle {a} for {kind}")))
        }
        _ => Ok(()),
    }
}

/// 2x2 unitary for a single-qubit kind.
pub fn single_qubit_matrix(kind: GateKind, angle: Option<f64>) -> Result<Mat2> {
    check_angle(kind, angle)?;
    let half = angle.unwrap_or(0.0) / 2.0;
    let (s, c) = half.sin_cos();
    let i = Complex64::i();
    Ok(match kind {
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::SX => {
            let a = Complex64::new(0.5, 0.5);
            let b = Complex64::new(0.5, -0.5);
            [[a, b], [b, a]]
        }
        GateKind::RX => [[c.into(), -i * s], [-i * s, c.into()]],
        GateKind::RY => [[c.into(), (-s).into()], [s.into(), c.into()]],
        GateKind::RZ => [
            [Complex64::new(c, -s), ZERO],
            [ZERO, Complex64::new(c, s)],
        ],
        GateKind::CX => {
            return Err(Error::Simulation("CX is not a single-qubit gate".into()));
        }
    })
}

fn dagger(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = ONE;
        StateVector {
            num_qubits,
            amplitudes,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probability(&self, basis: usize) -> f64 {
        self.amplitudes[basis].norm_sqr()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check_qubits(&self, gate: &Gate) -> Result<()> {
        if gate.qubits.len() != gate.kind.arity() {
            return Err(Error::Simulation(format!(
                "{} expects {} qubit(s), got {}",
                gate.kind,
                gate.kind.arity(),
                gate.qubits.len()
            )));
        }
        if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::Simulation(format!(
                "qubit {q} out of range for {}-qubit state",
                self.num_qubits
            )));
        }
        if gate.kind == GateKind::CX && gate.qubits[0] == gate.qubits[1] {
            return Err(Error::Simulation("CX control equals target".into()));
        }
        Ok(())
    }

    /// Applies `gate` in place. `angle` must be present exactly for the
    /// rotation kinds.
    pub fn apply_gate(&mut self, gate: &Gate, angle: Option<f64>) -> Result<()> {
        self.check_qubits(gate)?;
        if gate.kind == GateKind::CX {
            check_angle(gate.kind, angle)?;
            self.apply_cx(gate.qubits[0], gate.qubits[1]);
        } else {
            let m = single_qubit_matrix(gate.kind, angle)?;
            self.apply_single(gate.qubits[0], &m);
        }
        Ok(())
    }

    /// Applies the adjoint of `gate`.
    pub fn apply_gate_inverse(&mut self, gate: &Gate, angle: Option<f64>) -> Result<()> {
        self.check_qubits(gate)?;
        if gate.kind == GateKind::CX {
            check_angle(gate.kind, angle)?;
            self.apply_cx(gate.qubits[0], gate.qubits[1]);
        } else {
            let m = single_qubit_matrix(gate.kind, angle)?;
            self.apply_single(gate.qubits[0], &dagger(&m));
        }
        Ok(())
    }

    fn apply_single(&mut self, q: usize, m: &Mat2) {
        let stride = 1usize << q;
        let len = self.amplitudes.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amplitudes.len() {
            // visit each swapped pair once, from its target-0 member
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
    }
}

/// Executes circuits and computes state overlaps.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    pub max_qubits: usize,
}

impl Default for Simulator {
    fn default() -> Self {
        Simulator {
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

impl Simulator {
    pub fn with_max_qubits(max_qubits: usize) -> Self {
        Simulator { max_qubits }
    }

    pub fn init_state(&self, num_qubits: usize) -> Result<StateVector> {
        if num_qubits == 0 || num_qubits > self.max_qubits {
            return Err(Error::Simulation(format!(
                "qubit count {num_qubits} outside 1..={}",
                self.max_qubits
            )));
        }
        Ok(StateVector::zero(num_qubits))
    }

    fn check_theta(circuit: &ParameterizedCircuit, theta: &[f64]) -> Result<()> {
        if theta.len() != circuit.num_params {
            return Err(Error::Simulation(format!(
                "expected {} parameters, got {}",
                circuit.num_params,
                theta.len()
            )));
        }
        Ok(())
    }

    /// `U(theta)|0...0>`.
    pub fn run(&self, circuit: &ParameterizedCircuit, theta: &[f64]) -> Result<StateVector> {
        Self::check_theta(circuit, theta)?;
        let mut state = self.init_state(circuit.num_qubits)?;
        for g in &circuit.gates {
            state.apply_gate(g, g.param_index.map(|p| theta[p]))?;
        }
        Ok(state)
    }

    /// `U(theta2)^dagger U(theta1)|0...0>`, the kernel-method circuit.
    pub fn run_kernel(
        &self,
        circuit: &ParameterizedCircuit,
        theta1: &[f64],
        theta2: &[f64],
    ) -> Result<StateVector> {
        Self::check_theta(circuit, theta2)?;
        let mut state = self.run(circuit, theta1)?;
        for g in circuit.gates.iter().rev() {
            state.apply_gate_inverse(g, g.param_index.map(|p| theta2[p]))?;
        }
        Ok(state)
    }

    /// `|<psi(theta1)|psi(theta2)>|^2`.
    pub fn fidelity_exact(
        &self,
        circuit: &ParameterizedCircuit,
        theta1: &[f64],
        theta2: &[f64],
    ) -> Result<f64> {
        let a = self.run(circuit, theta1)?;
        let b = self.run(circuit, theta2)?;
        clamp_fidelity(a.inner(&b).norm_sqr())
    }

    /// Shot-sampled kernel estimate: the all-zeros count of `shots`
    /// measurements of the kernel circuit, divided by `shots`.
    pub fn fidelity_kernel_shots<R: Rng + ?Sized>(
        &self,
        circuit: &ParameterizedCircuit,
        theta1: &[f64],
        theta2: &[f64],
        shots: u64,
        rng: &mut R,
    ) -> Result<f64> {
        if shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        let kernel = self.run_kernel(circuit, theta1, theta2)?;
        let p = clamp_fidelity(kernel.probability(0))?;
        let dist = Binomial::new(shots, p).map_err(|e| Error::Numeric(e.to_string()))?;
        let k = dist.sample(rng);
        Ok(k as f64 / shots as f64)
    }
}

fn clamp_fidelity(f: f64) -> Result<f64> {
    if !f.is_finite() || !(-FIDELITY_SLACK..=1.0 + FIDELITY_SLACK).contains(&f) {
        return Err(Error::Numeric(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}
