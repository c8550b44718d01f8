//! Multilevel driver and the application of a finished factorization.

use std::time::Instant;

use crate::blocksparse::{BlockPartition, BlockSparseMatrix};
use crate::cefact::level::level_sweep;
use crate::cefact::stats::{predicted_nnz, FactorStats, LevelStats};
use crate::cefact::CompressionStrategy;
use crate::dense::{backward_solve_transposed, dense_cholesky, forward_solve, DenseBlock};
use crate::error::{CeError, Result};
use crate::problems::CoarseningPlan;
use crate::scalar::Scalar;

/// Block-diagonal rotation and eliminated-first permutation of one level.
#[derive(Clone, Debug)]
pub struct QFactor<T> {
    pub partition: BlockPartition,
    /// `Ũ_i` per block.
    pub rotations: Vec<DenseBlock<T>>,
    /// Segment-local `permutation[new] = old`.
    pub permutation: Vec<usize>,
}

impl<T: Scalar> QFactor<T> {
    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// `v ← P Ũᵀ v`
    pub fn apply(&self, v: &mut [T], scratch: &mut Vec<T>) {
        scratch.clear();
        scratch.resize(v.len(), T::zero());
        for (i, u) in self.rotations.iter().enumerate() {
            let r = self.partition.range(i);
            scratch[r.clone()].iter_mut().for_each(|s| *s = T::zero());
            u.gemv_t_add(&v[r.clone()], &mut scratch[r]);
        }
        for (new, &old) in self.permutation.iter().enumerate() {
            v[new] = scratch[old];
        }
    }

    /// `v ← Ũ Pᵀ v`
    pub fn apply_transpose(&self, v: &mut [T], scratch: &mut Vec<T>) {
        scratch.clear();
        scratch.resize(v.len(), T::zero());
        for (new, &old) in self.permutation.iter().enumerate() {
            scratch[old] = v[new];
        }
        for (i, u) in self.rotations.iter().enumerate() {
            let r = self.partition.range(i);
            u.gemv(&scratch[r.clone()], &mut v[r]);
        }
    }

    pub fn payload_bytes(&self) -> usize {
        self.rotations.iter().map(|u| u.as_slice().len()).sum::<usize>() * std::mem::size_of::<T>()
    }
}

/// One off-diagonal piece of an eliminated block column.
#[derive(Clone, Debug)]
pub struct FactorEntry<T> {
    /// Destination block of the level matrix.
    pub dest: usize,
    /// First segment row the piece lands on (after the level permutation).
    pub offset: usize,
    pub block: DenseBlock<T>,
}

#[derive(Clone, Debug)]
pub struct EliminatedColumn<T> {
    pub block: usize,
    pub offset: usize,
    /// `L̂_i`, lower triangular with positive diagonal.
    pub diag: DenseBlock<T>,
    pub entries: Vec<FactorEntry<T>>,
}

#[derive(Clone, Debug)]
pub struct LevelFactor<T> {
    pub level: usize,
    /// Scalars eliminated at this level.
    pub eliminated: usize,
    pub eliminated_counts: Vec<usize>,
    pub retained_counts: Vec<usize>,
    pub columns: Vec<EliminatedColumn<T>>,
}

impl<T: Scalar> LevelFactor<T> {
    pub fn payload_bytes(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.diag.as_slice().len() + c.entries.iter().map(|e| e.block.as_slice().len()).sum::<usize>())
            .sum::<usize>()
            * std::mem::size_of::<T>()
    }

    /// Stored scalar values, counting only the lower triangle of each diagonal factor.
    pub fn nonzeros(&self) -> usize {
        self.columns
            .iter()
            .map(|c| {
                let e = c.diag.rows();
                e * (e + 1) / 2 + c.entries.iter().map(|x| x.block.as_slice().len()).sum::<usize>()
            })
            .sum()
    }

    /// `seg[elim] ← L⁻¹ …` forward step over the level's block columns.
    fn forward(&self, seg: &mut [T]) {
        for col in &self.columns {
            let e = col.diag.rows();
            let (head, rest) = seg.split_at_mut(col.offset + e);
            let yi = &mut head[col.offset..];
            forward_solve(&col.diag, yi);
            for ent in &col.entries {
                let start = ent.offset - col.offset - e;
                ent.block.gemv_sub(yi, &mut rest[start..start + ent.block.rows()]);
            }
        }
    }

    fn backward(&self, seg: &mut [T]) {
        for col in self.columns.iter().rev() {
            let e = col.diag.rows();
            let (head, rest) = seg.split_at_mut(col.offset + e);
            let yi = &mut head[col.offset..];
            for ent in &col.entries {
                let start = ent.offset - col.offset - e;
                ent.block.gemv_t_sub(&rest[start..start + ent.block.rows()], yi);
            }
            backward_solve_transposed(&col.diag, yi);
        }
    }

    /// `t = L̆ᵀ seg` restricted to this level's columns (length = eliminated).
    fn apply_transpose(&self, seg: &[T]) -> Vec<T> {
        let mut t = vec![T::zero(); self.eliminated];
        for col in &self.columns {
            let e = col.diag.rows();
            let ti = &mut t[col.offset..col.offset + e];
            col.diag.gemv_t_add(&seg[col.offset..col.offset + e], ti);
            for ent in &col.entries {
                ent.block.gemv_t_add(&seg[ent.offset..ent.offset + ent.block.rows()], ti);
            }
        }
        t
    }

    /// `seg += L̆ t`
    fn apply_add(&self, t: &[T], seg: &mut [T]) {
        for col in &self.columns {
            let e = col.diag.rows();
            let ti = &t[col.offset..col.offset + e];
            col.diag.gemv_add(ti, &mut seg[col.offset..col.offset + e]);
            for ent in &col.entries {
                ent.block.gemv_add(ti, &mut seg[ent.offset..ent.offset + ent.block.rows()]);
            }
        }
    }
}

/// A completed level: its transform and its triangular factor.
#[derive(Clone, Debug)]
pub struct Level<T> {
    pub q: QFactor<T>,
    pub l: LevelFactor<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorOptions {
    pub strategy: CompressionStrategy,
    /// Factor the remainder densely once its dimension is at most this.
    pub dense_threshold: usize,
    /// Group size used once the plan has no more levels.
    pub join: usize,
}

impl FactorOptions {
    pub fn new(strategy: CompressionStrategy) -> Self {
        Self { strategy, dense_threshold: 2048, join: 2 }
    }

    pub fn dense_threshold(mut self, t: usize) -> Self {
        self.dense_threshold = t;
        self
    }

    pub fn join(mut self, j: usize) -> Self {
        self.join = j;
        self
    }
}

/// `A ≈ Qᵀ L Lᵀ Q` with `Q` the product of the level transforms.
#[derive(Clone, Debug)]
pub struct CeFactorization<T> {
    n: usize,
    levels: Vec<Level<T>>,
    tail: DenseBlock<T>,
    pub stats: FactorStats,
}

/// Largest dimension [`CeFactorization::reconstruct_dense`] will materialize.
pub const RECONSTRUCT_LIMIT: usize = 4096;

/// Runs the multilevel compression-elimination on `a`, which must already be
/// in the plan's ordering and partition.
pub fn ce_factorize<T: Scalar>(
    a: &BlockSparseMatrix<T>,
    plan: &CoarseningPlan,
    options: &FactorOptions,
) -> Result<CeFactorization<T>> {
    options.strategy.validate()?;
    if options.join < 2 {
        return Err(CeError::InvalidParameter(format!("join must be at least 2, got {}", options.join)));
    }
    if a.partition() != &plan.partition {
        return Err(CeError::InvalidPlan("matrix partition differs from the plan partition".into()));
    }
    let start = Instant::now();
    for i in 0..a.num_blocks() {
        let d = a.block(i, i).expect("diagonal block present");
        if dense_cholesky(d).is_err() {
            return Err(CeError::NotPositiveDefinite { block: i });
        }
    }

    let n = a.dim();
    let mut current = a.clone();
    let mut ids: Vec<usize> = (0..a.num_blocks()).collect();
    let mut symbolic_blocks = a.num_blocks();
    let mut assignments: Vec<Vec<usize>> = Vec::new();
    let mut levels = Vec::new();
    let mut level_stats = Vec::new();
    while current.dim() > options.dense_threshold {
        let j = levels.len() + 1;
        let t0 = Instant::now();
        let symbolic = match plan.levels.get(j - 1) {
            Some(a) => a.clone(),
            None => crate::problems::plan::consecutive_groups(symbolic_blocks, options.join),
        };
        let actual: Vec<usize> = ids.iter().map(|&s| symbolic[s]).collect();
        let edges = current.pattern().count_lower();
        let max_degree = current.pattern().max_degree();
        let out = level_sweep(&current, j, &options.strategy, &actual)?;
        let bytes = out.q.payload_bytes() + out.l.payload_bytes();
        let m = current.num_blocks();
        let ranks = &out.ranks;
        level_stats.push(LevelStats {
            level: j,
            blocks: m,
            blocks_eliminated: out.l.columns.len(),
            dim: current.dim(),
            eliminated: out.l.eliminated,
            l_blocks: out.l_blocks,
            edges,
            max_degree,
            max_rank: ranks.iter().copied().max().unwrap_or(0),
            mean_rank: if m == 0 { 0.0 } else { ranks.iter().sum::<usize>() as f64 / m as f64 },
            shifts: out.shifts,
            orthogonality_defect: out.orthogonality_defect,
            seconds: t0.elapsed().as_secs_f64(),
            bytes,
            assignment: symbolic.clone(),
            kept_groups: out.kept_groups.clone(),
        });
        symbolic_blocks = symbolic.iter().max().map_or(0, |&g| g + 1);
        assignments.push(symbolic);
        ids = out.kept_groups;
        levels.push(Level { q: out.q, l: out.l });
        current = out.remainder;
    }

    let tail_dim = current.dim();
    let dense = DenseBlock::from_vec(tail_dim, tail_dim, current.to_dense())?;
    let tail = dense_cholesky(&dense).map_err(|_| CeError::TailBreakdown { dim: tail_dim })?;
    let tail_block = current.partition().max_block_size();
    let prediction = predicted_nnz(a.pattern(), &assignments, tail_block.max(usize::from(tail_dim > 0)))?;

    let bytes_q = levels.iter().map(|l| l.q.payload_bytes()).sum();
    let bytes_l = levels.iter().map(|l| l.l.payload_bytes()).sum::<usize>()
        + std::mem::size_of_val(tail.as_slice());
    let l_nonzeros =
        levels.iter().map(|l| l.l.nonzeros()).sum::<usize>() + tail_dim * (tail_dim + 1) / 2;
    let stats = FactorStats {
        n,
        levels: level_stats,
        tail_dim,
        tail_blocks: current.num_blocks(),
        prediction,
        l_nonzeros,
        bytes_q,
        bytes_l,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(CeFactorization { n, levels, tail, stats })
}

impl<T: Scalar> CeFactorization<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> &[Level<T>] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Lower Cholesky factor of the dense remainder.
    pub fn tail(&self) -> &DenseBlock<T> {
        &self.tail
    }

    fn check_len(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n {
            return Err(CeError::LengthMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    /// `Q x`: every level's rotation and permutation, acting on trailing segments.
    pub fn apply_q(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        let mut v = x.to_vec();
        let mut scratch = Vec::new();
        let mut base = 0;
        for lvl in &self.levels {
            lvl.q.apply(&mut v[base..], &mut scratch);
            base += lvl.l.eliminated;
        }
        Ok(v)
    }

    pub fn apply_q_transpose(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_len(y)?;
        let mut v = y.to_vec();
        let mut scratch = Vec::new();
        let bases = self.bases();
        for (lvl, &base) in self.levels.iter().zip(&bases).rev() {
            lvl.q.apply_transpose(&mut v[base..], &mut scratch);
        }
        Ok(v)
    }

    fn bases(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.levels.len() + 1);
        let mut base = 0;
        for lvl in &self.levels {
            out.push(base);
            base += lvl.l.eliminated;
        }
        out.push(base);
        out
    }

    /// `x = Qᵀ L⁻ᵀ L⁻¹ Q b`
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.check_len(b)?;
        let mut v = b.to_vec();
        self.solve_in_place(&mut v);
        Ok(v)
    }

    pub fn solve_in_place(&self, v: &mut [T]) {
        let mut scratch = Vec::new();
        let bases = self.bases();
        for (lvl, &base) in self.levels.iter().zip(&bases) {
            lvl.q.apply(&mut v[base..], &mut scratch);
            lvl.l.forward(&mut v[base..]);
        }
        let tail = &mut v[*bases.last().unwrap()..];
        forward_solve(&self.tail, tail);
        backward_solve_transposed(&self.tail, tail);
        for (lvl, &base) in self.levels.iter().zip(&bases).rev() {
            lvl.l.backward(&mut v[base..]);
            lvl.q.apply_transpose(&mut v[base..], &mut scratch);
        }
    }

    /// `Qᵀ L Lᵀ Q x`, the operator this factorization represents.
    pub fn apply_operator(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        let mut z = x.to_vec();
        let mut scratch = Vec::new();
        let bases = self.bases();
        let mut ts = Vec::with_capacity(self.levels.len());
        for (lvl, &base) in self.levels.iter().zip(&bases) {
            lvl.q.apply(&mut z[base..], &mut scratch);
            ts.push(lvl.l.apply_transpose(&z[base..]));
        }
        let tb = *bases.last().unwrap();
        let mut out = vec![T::zero(); self.n];
        let mut w = vec![T::zero(); self.n - tb];
        self.tail.gemv_t_add(&z[tb..], &mut w);
        self.tail.gemv(&w, &mut out[tb..]);
        for ((lvl, &base), t) in self.levels.iter().zip(&bases).zip(&ts).rev() {
            lvl.l.apply_add(t, &mut out[base..]);
            lvl.q.apply_transpose(&mut out[base..], &mut scratch);
        }
        Ok(out)
    }

    /// Row-major dense `Qᵀ L Lᵀ Q`.
    pub fn reconstruct_dense(&self) -> Result<Vec<T>> {
        if self.n > RECONSTRUCT_LIMIT {
            return Err(CeError::TooLarge { n: self.n, limit: RECONSTRUCT_LIMIT });
        }
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.apply_operator(&e)?;
            e[j] = T::zero();
            for (i, v) in col.into_iter().enumerate() {
                out[i * n + j] = v;
            }
        }
        Ok(out)
    }

    /// `‖A − QᵀLLᵀQ‖_F / ‖A‖_F`
    pub fn reconstruction_error(&self, a: &BlockSparseMatrix<T>) -> Result<f64> {
        let rec = self.reconstruct_dense()?;
        let dense = a.to_dense();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (r, d) in rec.iter().zip(&dense) {
            num += (*r - *d).as_f64().powi(2);
            den += d.as_f64().powi(2);
        }
        Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
    }

    /// Payload bytes of all stored factors (rotations, triangular blocks, tail).
    pub fn payload_bytes(&self) -> usize {
        self.stats.bytes_q + self.stats.bytes_l
    }
}
