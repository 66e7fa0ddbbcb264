//! Parameterized circuit representation, statistics, validation and the
//! JSON circuit document.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CIRCUIT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    X,
    SX,
    RX,
    RY,
    RZ,
    CX,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::X,
        GateKind::SX,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::CX,
    ];

    pub const SINGLE_QUBIT: [GateKind; 5] = [
        GateKind::X,
        GateKind::SX,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
    ];

    pub fn is_parameterized(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ)
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::CX => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::SX => "SX",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CX => "CX",
        }
    }

    /// Position in [`GateKind::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown gate kind {s:?}"))
    }
}

/// One gate application. For CX, `qubits[0]` is the control and
/// `qubits[1]` the target.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub param_index: Option<usize>,
}

impl Gate {
    pub fn fixed(kind: GateKind, qubits: Vec<usize>) -> Self {
        Gate {
            kind,
            qubits,
            param_index: None,
        }
    }

    pub fn rotation(kind: GateKind, qubit: usize, param_index: usize) -> Self {
        Gate {
            kind,
            qubits: vec![qubit],
            param_index: Some(param_index),
        }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate::fixed(GateKind::CX, vec![control, target])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParameterizedCircuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
    pub num_params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NoQubits,
    WrongArity { expected: usize, found: usize },
    QubitOutOfRange { qubit: usize },
    DuplicateQubit,
    MissingParam,
    UnexpectedParam,
    ParamsNotContiguous,
    ParamCountMismatch { declared: usize, found: usize },
}

/// A single invariant violation, tied to a gate when one is responsible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub gate: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |f: &mut fmt::Formatter<'_>| match self.gate {
            Some(i) => write!(f, " in gate {i}"),
            None => Ok(()),
        };
        match &self.kind {
            ViolationKind::NoQubits => f.write_str("circuit has no qubits"),
            ViolationKind::WrongArity { expected, found } => {
                write!(f, "expected {expected} qubit(s), found {found}")?;
                at(f)
            }
            ViolationKind::QubitOutOfRange { qubit } => {
                write!(f, "qubit {qubit} out of range")?;
                at(f)
            }
            ViolationKind::DuplicateQubit => {
                f.write_str("duplicate qubit")?;
                at(f)
            }
            ViolationKind::MissingParam => {
                f.write_str("parameterized gate without param_index")?;
                at(f)
            }
            ViolationKind::UnexpectedParam => {
                f.write_str("fixed gate carries a param_index")?;
                at(f)
            }
            ViolationKind::ParamsNotContiguous => {
                f.write_str("parameter indices not contiguous")?;
                at(f)
            }
            ViolationKind::ParamCountMismatch { declared, found } => write!(
                f,
                "num_params is {declared} but {found} parameterized gates are present"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitStats {
    pub depth: usize,
    /// Equal to `num_qubits`; circuits carry no classical bits.
    pub width: usize,
    pub num_params: usize,
    pub num_qubits: usize,
    pub gate_counts: BTreeMap<GateKind, usize>,
}

impl CircuitStats {
    pub fn count(&self, kind: GateKind) -> usize {
        self.gate_counts.get(&kind).copied().unwrap_or(0)
    }
}

impl ParameterizedCircuit {
    /// Builds a circuit, counting parameter slots and rejecting invalid
    /// gate lists.
    pub fn new(num_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let num_params = gates.iter().filter(|g| g.param_index.is_some()).count();
        let c = ParameterizedCircuit {
            num_qubits,
            gates,
            num_params,
        };
        c.check()?;
        Ok(c)
    }

    pub fn builder(num_qubits: usize) -> CircuitBuilder {
        CircuitBuilder {
            num_qubits,
            gates: Vec::new(),
            next_param: 0,
        }
    }

    /// Every invariant violation, in gate order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.num_qubits == 0 {
            out.push(Violation {
                gate: None,
                kind: ViolationKind::NoQubits,
            });
        }
        let mut next_param = 0usize;
        let mut contiguous = true;
        for (i, g) in self.gates.iter().enumerate() {
            let v = |kind| Violation {
                gate: Some(i),
                kind,
            };
            if g.qubits.len() != g.kind.arity() {
                out.push(v(ViolationKind::WrongArity {
                    expected: g.kind.arity(),
                    found: g.qubits.len(),
                }));
            }
            for &q in &g.qubits {
                if q >= self.num_qubits {
                    out.push(v(ViolationKind::QubitOutOfRange { qubit: q }));
                }
            }
            if g.qubits.len() == 2 && g.qubits[0] == g.qubits[1] {
                out.push(v(ViolationKind::DuplicateQubit));
            }
            match (g.kind.is_parameterized(), g.param_index) {
                (true, None) => out.push(v(ViolationKind::MissingParam)),
                (false, Some(_)) => out.push(v(ViolationKind::UnexpectedParam)),
                (true, Some(p)) => {
                    if p != next_param && contiguous {
                        contiguous = false;
                        out.push(v(ViolationKind::ParamsNotContiguous));
                    }
                    next_param += 1;
                }
                (false, None) => {}
            }
        }
        let found = self
            .gates
            .iter()
            .filter(|g| g.param_index.is_some())
            .count();
        if found != self.num_params {
            out.push(Violation {
                gate: None,
                kind: ViolationKind::ParamCountMismatch {
                    declared: self.num_params,
                    found,
                },
            });
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidCircuit(v))
        }
    }

    pub fn stats(&self) -> Result<CircuitStats> {
        self.check()?;
        let mut layer = vec![0usize; self.num_qubits];
        let mut depth = 0;
        let mut gate_counts = BTreeMap::new();
        for g in &self.gates {
            let d = g.qubits.iter().map(|&q| layer[q]).max().unwrap_or(0) + 1;
            for &q in &g.qubits {
                layer[q] = d;
            }
            depth = depth.max(d);
            *gate_counts.entry(g.kind).or_insert(0) += 1;
        }
        Ok(CircuitStats {
            depth,
            width: self.num_qubits,
            num_params: self.num_params,
            num_qubits: self.num_qubits,
            gate_counts,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&CircuitDocument::from(self)).expect("circuit document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CircuitDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        doc.into_circuit()
    }
}

pub struct CircuitBuilder {
    num_qubits: usize,
    gates: Vec<Gate>,
    next_param: usize,
}

impl CircuitBuilder {
    pub fn gate(mut self, kind: GateKind, qubits: &[usize]) -> Self {
        let param_index = kind.is_parameterized().then(|| {
            self.next_param += 1;
            self.next_param - 1
        });
        self.gates.push(Gate {
            kind,
            qubits: qubits.to_vec(),
            param_index,
        });
        self
    }

    pub fn x(self, q: usize) -> Self {
        self.gate(GateKind::X, &[q])
    }
    pub fn sx(self, q: usize) -> Self {
        self.gate(GateKind::SX, &[q])
    }
    pub fn rx(self, q: usize) -> Self {
        self.gate(GateKind::RX, &[q])
    }
    pub fn ry(self, q: usize) -> Self {
        self.gate(GateKind::RY, &[q])
    }
    pub fn rz(self, q: usize) -> Self {
        self.gate(GateKind::RZ, &[q])
    }
    pub fn cx(self, control: usize, target: usize) -> Self {
        self.gate(GateKind::CX, &[control, target])
    }

    pub fn build(self) -> Result<ParameterizedCircuit> {
        ParameterizedCircuit::new(self.num_qubits, self.gates)
    }
}

/// On-disk circuit document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDocument {
    pub schema_version: String,
    pub num_qubits: usize,
    pub gates: Vec<GateRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateRecord {
    pub kind: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_index: Option<usize>,
}

impl From<&ParameterizedCircuit> for CircuitDocument {
    fn from(c: &ParameterizedCircuit) -> Self {
        CircuitDocument {
            schema_version: CIRCUIT_SCHEMA_VERSION.to_string(),
            num_qubits: c.num_qubits,
            gates: c
                .gates
                .iter()
                .map(|g| GateRecord {
                    kind: g.kind.as_str().to_string(),
                    qubits: g.qubits.clone(),
                    param_index: g.param_index,
                })
                .collect(),
        }
    }
}

impl CircuitDocument {
    pub fn into_circuit(self) -> Result<ParameterizedCircuit> {
        if self.schema_version != CIRCUIT_SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                expected: CIRCUIT_SCHEMA_VERSION.to_string(),
                found: self.schema_version,
            });
        }
        let mut gates = Vec::with_capacity(self.gates.len());
        for (i, r) in self.gates.into_iter().enumerate() {
            let kind = r.kind.parse::<GateKind>().map_err(|message| Error::Parse {
                location: format!("gates[{i}].kind"),
                message,
            })?;
            gates.push(Gate {
                kind,
                qubits: r.qubits,
                param_index: r.param_index,
            });
        }
        ParameterizedCircuit::new(self.num_qubits, gates).map_err(|e| match e {
            Error::InvalidCircuit(v) => Error::Parse {
                location: v
                    .first()
                    .and_then(|v| v.gate)
                    .map_or_else(|| "circuit".to_string(), |i| format!("gates[{i}]")),
                message: format_violations(&v),
            },
            other => other,
        })
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Serialize for ParameterizedCircuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CircuitDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParameterizedCircuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        CircuitDocument::deserialize(d)?
            .into_circuit()
            .map_err(serde::de::Error::custom)
    }
}
