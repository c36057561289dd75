//! Error taxonomy shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate tangent basis (Gram condition number {cond:.3e})")]
    DegenerateBasis { cond: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("inconsistent immersion: {0}")]
    InconsistentImmersion(String),

    #[error("inconsistent mesh: {0}")]
    InconsistentMesh(String),

    #[error("shift {lambda} is within {dist:.3e} of the discrete Dirichlet spectrum")]
    NearResonance { lambda: f64, dist: f64 },

    #[error("solver failed to converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
