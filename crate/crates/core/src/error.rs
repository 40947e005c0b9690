use thiserror::Error;

use crate::lp::LpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {rows}x{cols}")]
    InvalidDimensions { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("matrix is rank deficient: numerical rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    #[error("matrix rows are not orthonormal (max |FF^T - I| = {0:e})")]
    NotOrthonormal(f64),

    #[error("null-space projection degenerate after {0} attempts")]
    DegenerateSample(usize),

    #[error("malformed LP: {0}")]
    MalformedLp(String),

    #[error(
        "decode failed: LP status {status:?} after {iterations} iterations \
         (primal residual {primal_residual:e}, duality gap {duality_gap:e})"
    )]
    DecodeFailed {
        status: LpStatus,
        iterations: usize,
        primal_residual: f64,
        duality_gap: f64,
    },

    #[error("median of the zero vector is undefined")]
    ZeroVector,

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("basis pursuit decodes the initial vector correctly")]
    InitNotFailing,

    #[error("step budget of {0} exceeded")]
    StepBudgetExceeded(usize),

    #[error("invalid sparsity k={k} for length m={m}")]
    InvalidK { k: usize, m: usize },

    #[error("support enumeration needs {0} candidates, above the budget")]
    CombinatorialBudgetExceeded(u128),

    #[error("support submatrix is rank deficient")]
    RankDeficientSupport,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
