use std::path::PathBuf;

use crate::circuit::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid circuit: {}", format_violations(.0))]
    InvalidCircuit(Vec<Violation>),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("schema version mismatch: expected {expected:?}, found {found:?}")]
    VersionMismatch { expected: String, found: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from numerical breakdown rather than bad
    /// inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Numeric(_))
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
