//! Block-partitioned symmetric sparse storage and symbolic pattern algebra.

mod matrix;
pub mod mmio;
mod partition;
mod pattern;

pub use matrix::{BlockSparseMatrix, Symmetry, Triplet};
pub use partition::BlockPartition;
pub use pattern::BlockSparsityPattern;
