use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lattice sum Li_{order}(e^(i·{phase})) diverges")]
    DivergentLatticeSum { order: u32, phase: f64 },

    #[error("decay matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("eigensolver failed to converge for matrix {fingerprint:016x}")]
    EigenSolver { fingerprint: u64 },

    #[error("energy {energy} is within {distance:e} of an undamped resonance")]
    Singular { energy: f64, distance: f64 },

    #[error("detector node {index} at {position:?} lies inside the chain region")]
    NodeInsideChain { index: usize, position: [f64; 3] },

    #[error("ensemble aborted: {failed} of {total} realizations failed")]
    EnsembleAborted { failed: usize, total: usize },

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
