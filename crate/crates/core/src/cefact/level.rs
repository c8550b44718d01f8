//! One level of compression-elimination.

use crate::blocksparse::{BlockPartition, BlockSparseMatrix, BlockSparsityPattern};
use crate::cefact::factor::{EliminatedColumn, FactorEntry, LevelFactor, QFactor};
use crate::cefact::CompressionStrategy;
use crate::dense::{left_singular_basis, DenseBlock};
use crate::error::{CeError, Result};
use crate::scalar::Scalar;

/// Working copy of a level matrix, stored on the squared pattern so that
/// every Schur update has a home.
#[derive(Clone, Debug)]
pub struct LevelMatrix<T> {
    level: usize,
    close: BlockSparsityPattern,
    far: BlockSparsityPattern,
    work: BlockSparseMatrix<T>,
}

/// Output of eliminating the trailing rows of one compressed block row.
#[derive(Clone, Debug)]
pub struct SubrowFactor<T> {
    pub block: usize,
    pub retained: usize,
    /// Cholesky factor of the eliminated diagonal part.
    pub diag: DenseBlock<T>,
    /// `(a, L̃_a)` for every close block `a`, each `B_a × e` in the level basis.
    pub targets: Vec<(usize, DenseBlock<T>)>,
    pub shifted: bool,
}

impl<T: Scalar> LevelMatrix<T> {
    pub fn new(a: &BlockSparseMatrix<T>, level: usize) -> Self {
        let close = a.pattern().clone();
        let square = close.square();
        let far = square.difference(&close);
        let mut work = BlockSparseMatrix::zeros(a.partition().clone(), square);
        for i in 0..a.num_blocks() {
            for (&j, blk) in close.row(i).iter().zip(a.row_blocks(i)) {
                *work.block_mut(i, j).expect("close block inside square") = blk.clone();
            }
        }
        Self { level, close, far, work }
    }

    /// Wraps a matrix that already lives on `close.square()` (fill included).
    #[cfg(test)]
    pub(crate) fn from_working(work: BlockSparseMatrix<T>, close: BlockSparsityPattern, level: usize) -> Self {
        assert_eq!(work.pattern(), &close.square());
        let far = work.pattern().difference(&close);
        Self { level, close, far, work }
    }

    pub fn matrix(&self) -> &BlockSparseMatrix<T> {
        &self.work
    }

    pub fn close(&self) -> &BlockSparsityPattern {
        &self.close
    }

    pub fn far(&self) -> &BlockSparsityPattern {
        &self.far
    }

    pub fn partition(&self) -> &BlockPartition {
        self.work.partition()
    }

    /// Far blocks of row `i` side by side.
    pub fn far_row_matrix(&self, i: usize) -> DenseBlock<T> {
        let far = self.far.row(i);
        let p = self.work.partition();
        let rows = p.block_size(i);
        let cols: usize = far.iter().map(|&j| p.block_size(j)).sum();
        let mut f = DenseBlock::zeros(rows, cols);
        let mut c0 = 0;
        for &j in far {
            let blk = self.work.block(i, j).expect("far block stored");
            for r in 0..rows {
                f.row_mut(r)[c0..c0 + blk.cols()].copy_from_slice(blk.row(r));
            }
            c0 += blk.cols();
        }
        f
    }

    /// Computes `Ũ_i` and the retained rank, applies `Ũ_i` two-sidedly and
    /// drops the discarded part of the far blocks.
    pub fn compress_row(&mut self, i: usize, strategy: &CompressionStrategy) -> Result<(DenseBlock<T>, usize)> {
        let bi = self.work.partition().block_size(i);
        let has_far = !self.far.row(i).is_empty();
        if !has_far {
            return Ok((DenseBlock::identity(bi), 0));
        }
        let f = self.far_row_matrix(i);
        let (u, sigma) = left_singular_basis(&f)?;
        let r = strategy.rank_for(&sigma, has_far, bi);
        if sigma.first().is_none_or(|s| *s == T::zero()) {
            // nothing to rotate; the far blocks are already zero
            return Ok((DenseBlock::identity(bi), r));
        }
        self.rotate(i, &u);
        for idx in 0..self.far.row(i).len() {
            let j = self.far.row(i)[idx];
            self.work.block_mut(i, j).unwrap().zero_rows(r, bi);
            self.work.block_mut(j, i).unwrap().zero_cols(r, bi);
        }
        Ok((u, r))
    }

    fn rotate(&mut self, i: usize, u: &DenseBlock<T>) {
        let cols: Vec<usize> = self.work.pattern().row(i).to_vec();
        for j in cols {
            if j == i {
                let d = self.work.block(i, i).unwrap();
                let mut rotated = u.matmul_tn(&d.matmul(u));
                let n = rotated.rows();
                for a in 0..n {
                    for b in 0..a {
                        let avg = T::lit(0.5) * (rotated[(a, b)] + rotated[(b, a)]);
                        rotated[(a, b)] = avg;
                        rotated[(b, a)] = avg;
                    }
                }
                *self.work.block_mut(i, i).unwrap() = rotated;
            } else {
                let row = u.matmul_tn(self.work.block(i, j).unwrap());
                *self.work.block_mut(i, j).unwrap() = row;
                let col = self.work.block(j, i).unwrap().matmul(u);
                *self.work.block_mut(j, i).unwrap() = col;
            }
        }
    }

    /// Eliminates local rows `r..B_i` of block row `i` (already compressed),
    /// applies the Schur update and zeroes the eliminated rows and columns.
    pub fn eliminate_subrow(&mut self, i: usize, r: usize) -> Result<SubrowFactor<T>> {
        let bi = self.work.partition().block_size(i);
        let e = bi - r;
        if e == 0 {
            return Ok(SubrowFactor { block: i, retained: r, diag: DenseBlock::zeros(0, 0), targets: Vec::new(), shifted: false });
        }
        let s = self.work.block(i, i).unwrap().submatrix(r, bi, r, bi);
        let mut shifted = false;
        let mut first = s.clone();
        let diag = match first.cholesky_in_place() {
            Ok(()) => first,
            Err(_) => {
                shifted = true;
                let delta = T::lit(1e-12) * s.trace() / T::lit(e as f64);
                let mut l = s;
                for k in 0..e {
                    l[(k, k)] += delta;
                }
                l.cholesky_in_place().map_err(|_| CeError::Breakdown { level: self.level, block: i })?;
                l
            }
        };

        let close: Vec<usize> = self.close.row(i).to_vec();
        let mut w: Vec<DenseBlock<T>> = Vec::with_capacity(close.len());
        for &a in &close {
            let blk = self.work.block(i, a).unwrap();
            let mut x = blk.submatrix(r, bi, 0, blk.cols());
            x.solve_lower_in_place(&diag);
            w.push(x);
        }
        for (ka, &a) in close.iter().enumerate() {
            for (kb, &b) in close.iter().enumerate() {
                let target = self
                    .work
                    .block_mut(a, b)
                    .ok_or(CeError::PatternViolation { level: self.level, row: a, col: b })?;
                target.sub_matmul_tn(&w[ka], &w[kb]);
            }
        }
        let row: Vec<usize> = self.work.pattern().row(i).to_vec();
        for j in row {
            self.work.block_mut(i, j).unwrap().zero_rows(r, bi);
            self.work.block_mut(j, i).unwrap().zero_cols(r, bi);
        }
        let targets = close.into_iter().zip(w).map(|(a, wa)| (a, wa.transpose())).collect();
        Ok(SubrowFactor { block: i, retained: r, diag, targets, shifted })
    }
}

/// Everything one level produces.
#[derive(Clone, Debug)]
pub struct SweepOutput<T> {
    pub q: QFactor<T>,
    pub l: LevelFactor<T>,
    pub remainder: BlockSparseMatrix<T>,
    /// Group id of each remainder block (groups that kept no rows are dropped).
    pub kept_groups: Vec<usize>,
    pub ranks: Vec<usize>,
    pub l_blocks: usize,
    pub shifts: usize,
    pub orthogonality_defect: f64,
}

/// Runs compression and elimination over every block row in ascending order,
/// then packs the retained rows into super-blocks given by `assignment`
/// (block → group id).
pub fn level_sweep<T: Scalar>(
    a: &BlockSparseMatrix<T>,
    level: usize,
    strategy: &CompressionStrategy,
    assignment: &[usize],
) -> Result<SweepOutput<T>> {
    let m = a.num_blocks();
    if assignment.len() != m {
        return Err(CeError::LengthMismatch { expected: m, got: assignment.len() });
    }
    let mut lm = LevelMatrix::new(a, level);
    let part = a.partition().clone();
    let mut rotations = Vec::with_capacity(m);
    let mut ranks = Vec::with_capacity(m);
    let mut subrows = Vec::with_capacity(m);
    let mut shifts = 0;
    let mut orth = 0.0f64;
    for i in 0..m {
        let shapes_before: Vec<(usize, usize)> =
            lm.work.row_blocks(i).iter().map(|b| (b.rows(), b.cols())).collect();
        let (u, r) = lm.compress_row(i, strategy)?;
        let shapes_after = lm.work.row_blocks(i).iter().map(|b| (b.rows(), b.cols()));
        if !shapes_after.eq(shapes_before) {
            return Err(CeError::InvalidPattern(format!("compression of row {i} changed block shapes")));
        }
        orth = orth.max(u.orthogonality_defect().as_f64());
        let sub = lm.eliminate_subrow(i, r)?;
        shifts += usize::from(sub.shifted);
        rotations.push(u);
        ranks.push(r);
        subrows.push(sub);
    }

    // Rotate factor pieces whose destination was compressed after elimination.
    for sub in &mut subrows {
        for (dest, blk) in &mut sub.targets {
            if *dest > sub.block {
                *blk = rotations[*dest].matmul_tn(blk);
            }
        }
    }

    // Segment layout: eliminated rows in block order, then retained rows by super-block.
    let elim: Vec<usize> = (0..m).map(|i| part.block_size(i) - ranks[i]).collect();
    let mut elim_off = vec![0usize; m];
    let mut total_elim = 0;
    for i in 0..m {
        elim_off[i] = total_elim;
        total_elim += elim[i];
    }
    let num_groups = assignment.iter().max().map_or(0, |&g| g + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_groups];
    for (b, &g) in assignment.iter().enumerate() {
        members[g].push(b);
    }
    let mut kept_groups = Vec::new();
    let mut super_sizes = Vec::new();
    let mut super_of = vec![usize::MAX; num_groups];
    for (g, mem) in members.iter().enumerate() {
        let size: usize = mem.iter().map(|&b| ranks[b]).sum();
        if size > 0 {
            super_of[g] = kept_groups.len();
            kept_groups.push(g);
            super_sizes.push(size);
        }
    }
    let mut ret_off = vec![0usize; m];
    let mut inner_off = vec![0usize; m];
    let mut permutation = Vec::with_capacity(part.dim());
    for (i, &r) in ranks.iter().enumerate() {
        permutation.extend(part.start(i) + r..part.start(i) + part.block_size(i));
    }
    let mut cursor = total_elim;
    for &g in &kept_groups {
        let mut inner = 0;
        for &b in &members[g] {
            ret_off[b] = cursor;
            inner_off[b] = inner;
            cursor += ranks[b];
            inner += ranks[b];
            permutation.extend(part.start(b)..part.start(b) + ranks[b]);
        }
    }
    debug_assert_eq!(cursor, part.dim());

    let mut columns = Vec::new();
    let mut l_blocks = 0;
    for sub in subrows {
        let i = sub.block;
        if elim[i] == 0 {
            continue;
        }
        let mut entries = Vec::new();
        for (dest, blk) in sub.targets {
            if dest >= i {
                l_blocks += 2;
            }
            let r = ranks[dest];
            if dest > i && elim[dest] > 0 {
                entries.push(FactorEntry {
                    dest,
                    offset: elim_off[dest],
                    block: blk.submatrix(r, blk.rows(), 0, blk.cols()),
                });
            }
            if r > 0 {
                entries.push(FactorEntry { dest, offset: ret_off[dest], block: blk.submatrix(0, r, 0, blk.cols()) });
            }
        }
        entries.sort_by_key(|e| e.offset);
        columns.push(EliminatedColumn { block: i, offset: elim_off[i], diag: sub.diag, entries });
    }

    // Remainder on the coarsened squared pattern.
    let coarse = lm.work.pattern().coarsen_by_assignment(assignment, num_groups);
    let rows: Vec<Vec<usize>> = kept_groups
        .iter()
        .map(|&g| coarse.row(g).iter().filter_map(|&h| (super_of[h] != usize::MAX).then_some(super_of[h])).collect())
        .collect();
    let rem_pattern = BlockSparsityPattern::from_rows(rows)?;
    let rem_part = if super_sizes.is_empty() {
        BlockPartition::new(vec![0])?
    } else {
        BlockPartition::from_sizes(&super_sizes)?
    };
    let mut remainder = BlockSparseMatrix::zeros(rem_part, rem_pattern);
    for x in 0..m {
        if ranks[x] == 0 {
            continue;
        }
        let sx = super_of[assignment[x]];
        for (&y, blk) in lm.work.pattern().row(x).iter().zip(lm.work.row_blocks(x)) {
            if ranks[y] == 0 {
                continue;
            }
            let sy = super_of[assignment[y]];
            let target = remainder.block_mut(sx, sy).expect("coarsened pattern covers the remainder");
            let (r0, c0) = (inner_off[x], inner_off[y]);
            for row in 0..ranks[x] {
                target.row_mut(r0 + row)[c0..c0 + ranks[y]].copy_from_slice(&blk.row(row)[..ranks[y]]);
            }
        }
    }

    let q = QFactor { partition: part.clone(), rotations, permutation };
    let l = LevelFactor {
        level,
        eliminated: total_elim,
        eliminated_counts: elim,
        retained_counts: ranks.clone(),
        columns,
    };
    Ok(SweepOutput { q, l, remainder, kept_groups, ranks, l_blocks, shifts, orthogonality_defect: orth })
}
