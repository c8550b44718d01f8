//! Compression-elimination (CE) approximate factorization of sparse SPD matrices.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the command-line tool uses.

pub mod blocksparse;
pub mod cefact;
pub mod dense;
pub mod error;
pub mod krylov;
pub mod problems;
pub mod scalar;

pub use blocksparse::{BlockPartition, BlockSparsityPattern, Symmetry, Triplet};
pub use cefact::{ce_factorize, CompressionStrategy, FactorOptions, FactorStats};
pub use error::{CeError, Result};
pub use krylov::{minres, MinresOptions, SolveReport};
pub use problems::{CoarseningPlan, Grid3D};
pub use scalar::Scalar;

pub type Matrix = blocksparse::BlockSparseMatrix<f64>;
pub type Block = dense::DenseBlock<f64>;
pub type Factorization = cefact::CeFactorization<f64>;
pub type Problem = problems::AssembledProblem<f64>;

pub type MatrixF32 = blocksparse::BlockSparseMatrix<f32>;
pub type FactorizationF32 = cefact::CeFactorization<f32>;

/// Builds the block matrix in the plan's ordering from entries given in the
/// original numbering (both triangles listed).
pub fn matrix_for_plan<T: Scalar>(
    entries: &[Triplet<T>],
    plan: &CoarseningPlan,
) -> Result<blocksparse::BlockSparseMatrix<T>> {
    blocksparse::BlockSparseMatrix::from_triplets(&plan.permute_triplets(entries), plan.partition.clone(), Symmetry::Full)
}
