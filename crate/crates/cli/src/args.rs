use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ce_core::CompressionStrategy;

#[derive(Parser, Debug)]
#[command(name = "cesolve", version, about = "Compression-elimination factorization benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a test problem as matrix, right-hand side and coarsening plan.
    Gen(GenArgs),
    /// Factorize and write per-level statistics.
    Factor(FactorArgs),
    /// Factorize and solve with preconditioned MINRES (or directly).
    Solve(SolveArgs),
    /// Run factor and solve over a ladder of sizes and strategies.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// `diffusion3d NX NY NZ`, `laplace2d N` or `file PATH`.
    #[arg(value_name = "PROBLEM", required = true, num_args = 1..=4)]
    pub problem: Vec<String>,
    /// Scalar block size of the finest level.
    #[arg(long, default_value_t = 8)]
    pub block: usize,
    /// Blocks merged into one super-block per level.
    #[arg(long, default_value_t = 2)]
    pub join: usize,
    /// Coarsening plan for `file` problems (default: consecutive blocks).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Right-hand side for `file` problems (default: random from `--seed`).
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct StrategyArgs {
    /// Relative truncation threshold (default 1e-3).
    #[arg(long, conflicts_with = "rank")]
    pub eps: Option<f64>,
    /// Fixed retained rank per block row.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Compare singular values with `eps` directly instead of `eps·σ₁`.
    #[arg(long, conflicts_with = "rank")]
    pub eps_absolute: bool,
    /// Switch to dense Cholesky once the remainder is at most this size.
    #[arg(long, default_value_t = 2048)]
    pub dense_threshold: usize,
}

impl StrategyArgs {
    pub fn strategy(&self) -> Result<CompressionStrategy, String> {
        match (self.eps, self.rank) {
            (_, Some(0)) => Err("--rank must be positive".into()),
            (_, Some(r)) => Ok(CompressionStrategy::rank(r)),
            (eps, None) => {
                let eps = eps.unwrap_or(1e-3);
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(format!("--eps must be positive, got {eps}"));
                }
                Ok(CompressionStrategy::AdaptiveEps { eps, absolute: self.eps_absolute })
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Args, Debug)]
pub struct FactorArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub maxit: usize,
    /// Apply the factorization once instead of iterating.
    #[arg(long, conflicts_with = "no_precond")]
    pub direct: bool,
    /// Plain MINRES without factorizing.
    #[arg(long)]
    pub no_precond: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// `diffusion3d` (cubes) or `laplace2d`.
    #[arg(value_name = "KIND")]
    pub kind: String,
    /// Comma-separated grid sizes; may be empty.
    #[arg(long, default_value = "8,16")]
    pub ladder: String,
    /// Comma-separated relative thresholds.
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    /// Comma-separated fixed ranks.
    #[arg(long, value_delimiter = ',')]
    pub rank: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub block: usize,
    #[arg(long, default_value_t = 2)]
    pub join: usize,
    #[arg(long, default_value_t = 2048)]
    pub dense_threshold: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub maxit: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
