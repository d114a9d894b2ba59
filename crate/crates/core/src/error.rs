use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid values must be finite")]
    NonFiniteGrid,

    #[error("grid size {m} too small for truncation radius {n} (need at least {need})")]
    GridTooSmall { m: usize, n: usize, need: usize },

    #[error("truncation radius mismatch: {0} vs {1}")]
    RadiusMismatch(usize, usize),

    #[error("fractional exponent must be positive, got {0}")]
    NonPositiveExponent(f64),

    #[error("field is not divergence-free (residual {residual:.3e} > {tolerance:.3e})")]
    NotDivergenceFree { residual: f64, tolerance: f64 },

    #[error("invalid noise basis: {0}")]
    InvalidNoise(String),

    #[error("dyadic block {q} has no modes at truncation {n}")]
    EmptyBlock { q: i32, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),

    #[error("corrupt checkpoint {path}: {reason}")]
    CorruptCheckpoint { path: PathBuf, reason: String },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
