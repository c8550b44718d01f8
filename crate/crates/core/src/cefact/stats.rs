use std::fmt::Write as _;

use crate::blocksparse::BlockSparsityPattern;
use crate::error::{CeError, Result};

/// Per-level bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub blocks: usize,
    /// Blocks that eliminated at least one row.
    pub blocks_eliminated: usize,
    /// Scalar dimension entering the level.
    pub dim: usize,
    /// Scalars eliminated.
    pub eliminated: usize,
    /// `#L_j`: two pieces per lower-triangle destination of each eliminated block column.
    pub l_blocks: usize,
    /// Lower-triangle-plus-diagonal block count of the level pattern.
    pub edges: usize,
    pub max_degree: usize,
    pub max_rank: usize,
    pub mean_rank: f64,
    /// Diagonal-shift retries.
    pub shifts: usize,
    pub orthogonality_defect: f64,
    pub seconds: f64,
    pub bytes: usize,
    /// Symbolic merge schedule of this level (symbolic block id to super-block).
    pub assignment: Vec<usize>,
    /// Symbolic ids of the super-blocks that kept at least one row.
    pub kept_groups: Vec<usize>,
}

impl LevelStats {
    pub fn eliminated_fraction(&self) -> f64 {
        if self.dim == 0 {
            0.0
        } else {
            self.eliminated as f64 / self.dim as f64
        }
    }
}

/// Symbolic count of factor blocks for a given pattern and merge schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct NnzPrediction {
    /// `2·#bsp` per level.
    pub level_blocks: Vec<usize>,
    /// Lower-triangle-plus-diagonal block count per level.
    pub edges: Vec<usize>,
    pub max_degrees: Vec<usize>,
    /// Block count left for the dense tail.
    pub tail_blocks: usize,
    /// `½·M_K²·r²`
    pub tail: f64,
    pub total: f64,
}

/// Iterates squaring and coarsening along `assignments` (block → group per
/// level) and sums `2·#bsp` per level plus the dense tail `½·M_K²·r²`, where
/// `r` is the scalar size of a tail block.
pub fn predicted_nnz(
    pattern: &BlockSparsityPattern,
    assignments: &[Vec<usize>],
    tail_block: usize,
) -> Result<NnzPrediction> {
    let mut p = pattern.clone();
    let mut level_blocks = Vec::with_capacity(assignments.len());
    let mut edges = Vec::with_capacity(assignments.len());
    let mut max_degrees = Vec::with_capacity(assignments.len());
    for (l, a) in assignments.iter().enumerate() {
        if a.len() != p.num_blocks() {
            return Err(CeError::InvalidPlan(format!(
                "level {} assigns {} blocks, pattern has {}",
                l + 1,
                a.len(),
                p.num_blocks()
            )));
        }
        let e = p.count_lower();
        edges.push(e);
        level_blocks.push(2 * e);
        max_degrees.push(p.max_degree());
        let groups = a.iter().max().map_or(0, |&g| g + 1);
        p = p.square().coarsen_by_assignment(a, groups);
    }
    let m = p.num_blocks() as f64;
    let r = tail_block as f64;
    let tail = 0.5 * m * m * r * r;
    let total = level_blocks.iter().sum::<usize>() as f64 + tail;
    Ok(NnzPrediction { level_blocks, edges, max_degrees, tail_blocks: p.num_blocks(), tail, total })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorStats {
    pub n: usize,
    pub levels: Vec<LevelStats>,
    pub tail_dim: usize,
    pub tail_blocks: usize,
    pub prediction: NnzPrediction,
    /// Stored scalar values of `L` (lower triangles of the diagonal factors).
    pub l_nonzeros: usize,
    pub bytes_q: usize,
    pub bytes_l: usize,
    pub seconds: f64,
}

impl FactorStats {
    /// `#L = Σ_j #L_j + ½·n_tail²`
    pub fn l_blocks(&self) -> f64 {
        self.levels.iter().map(|l| l.l_blocks).sum::<usize>() as f64 + 0.5 * (self.tail_dim as f64).powi(2)
    }

    pub fn predicted_l_blocks(&self) -> f64 {
        self.prediction.total
    }

    pub fn bytes(&self) -> usize {
        self.bytes_q + self.bytes_l
    }

    pub fn max_orthogonality_defect(&self) -> f64 {
        self.levels.iter().map(|l| l.orthogonality_defect).fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<StatsRow> {
        self.levels
            .iter()
            .map(|l| StatsRow {
                level: l.level,
                blocks_eliminated: l.blocks_eliminated,
                l_blocks: l.l_blocks,
                max_rank: l.max_rank,
                mean_rank: l.mean_rank,
                seconds: l.seconds,
                bytes: l.bytes,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        write_stats_csv(&self.rows())
    }
}

/// One line of the per-level CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsRow {
    pub level: usize,
    pub blocks_eliminated: usize,
    pub l_blocks: usize,
    pub max_rank: usize,
    pub mean_rank: f64,
    pub seconds: f64,
    pub bytes: usize,
}

pub const STATS_HEADER: &str = "level,blocks_eliminated,l_blocks,max_rank,mean_rank,seconds,bytes";

pub fn write_stats_csv(rows: &[StatsRow]) -> String {
    let mut s = String::from(STATS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:e},{:e},{}",
            r.level, r.blocks_eliminated, r.l_blocks, r.max_rank, r.mean_rank, r.seconds, r.bytes
        );
    }
    s
}

pub fn parse_stats_csv(text: &str) -> Result<Vec<StatsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(STATS_HEADER) {
        return Err(CeError::Parse { line: 1, msg: "unexpected stats header".into() });
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let bad = |msg: &str| CeError::Parse { line: k + 2, msg: msg.to_string() };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad("expected 7 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad("bad float"));
        rows.push(StatsRow {
            level: int(f[0])?,
            blocks_eliminated: int(f[1])?,
            l_blocks: int(f[2])?,
            max_rank: int(f[3])?,
            mean_rank: float(f[4])?,
            seconds: float(f[5])?,
            bytes: int(f[6])?,
        });
    }
    Ok(rows)
}
