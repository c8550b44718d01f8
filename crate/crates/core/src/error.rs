use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CeError {
    #[error("index ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("input is not symmetric: max |a_ij - a_ji| = {diff:e} exceeds {tol:e}")]
    NotSymmetric { diff: f64, tol: f64 },

    #[error("invalid block partition: {0}")]
    InvalidPartition(String),

    #[error("invalid sparsity pattern: {0}")]
    InvalidPattern(String),

    #[error("groups do not partition the block set: {0}")]
    InvalidGroups(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("singular value computation failed to converge on a {rows}x{cols} block")]
    SvdFailure { rows: usize, cols: usize },

    #[error("Cholesky breakdown at level {level}, block {block}")]
    Breakdown { level: usize, block: usize },

    #[error("Cholesky breakdown in the dense remainder (dimension {dim})")]
    TailBreakdown { dim: usize },

    #[error("input is not positive definite: diagonal block {block} has no Cholesky factor")]
    NotPositiveDefinite { block: usize },

    #[error("Schur update at level {level} touches block ({row}, {col}) outside the squared pattern")]
    PatternViolation { level: usize, row: usize, col: usize },

    #[error("dimension {n} exceeds the dense materialization limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("invalid coarsening plan: {0}")]
    InvalidPlan(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("preconditioner returned a non-finite value")]
    NonFinite,

    #[error("preconditioner is not positive definite (r'Mr = {0:e})")]
    IndefinitePreconditioner(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, CeError>;
