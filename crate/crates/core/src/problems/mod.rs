//! Model problems and geometric block orderings.

mod grid;
pub(crate) mod plan;

pub use grid::{
    assemble_diffusion_3d, assemble_diffusion_3d_with, assemble_laplace_2d_9pt, default_diffusion,
    AssembledProblem, Grid3D,
};
pub use plan::{geometric_block_ordering, CoarseningPlan};
