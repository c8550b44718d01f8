//! Compression-elimination factorization.

mod factor;
mod level;
mod stats;
mod strategy;

pub use factor::{
    ce_factorize, CeFactorization, EliminatedColumn, FactorEntry, FactorOptions, Level, LevelFactor, QFactor,
    RECONSTRUCT_LIMIT,
};
pub use level::{level_sweep, LevelMatrix, SubrowFactor, SweepOutput};
pub use stats::{
    parse_stats_csv, predicted_nnz, write_stats_csv, FactorStats, LevelStats, NnzPrediction, StatsRow, STATS_HEADER,
};
pub use strategy::CompressionStrategy;

#[cfg(test)]
mod tests;
