use thiserror::Error;

/// Coarse classification used by front ends to map failures onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Invalid,
    NonConvergence,
    Domain,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("tag {tag} is not attached to interval {interval}")]
    NotAttached { tag: f64, interval: String },

    #[error("division depth limit {0} exceeded")]
    DepthLimit(usize),

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("grid leakage: {fraction:.3e} of the spectral magnitude reached the outer band")]
    GridLeakage { fraction: f64 },

    #[error("time step {step} is not a non-negative multiple of {spacing}")]
    NotGridMultiple { step: f64, spacing: f64 },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) => ErrorKind::Domain,
            Error::NonConvergence(_) | Error::DepthLimit(_) | Error::GridLeakage { .. } => ErrorKind::NonConvergence,
            Error::Invalid(_)
            | Error::NotAttached { .. }
            | Error::DimensionCap { .. }
            | Error::NotGridMultiple { .. } => ErrorKind::Invalid,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
