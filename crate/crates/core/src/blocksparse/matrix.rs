use crate::blocksparse::{BlockPartition, BlockSparsityPattern};
use crate::dense::DenseBlock;
use crate::error::{CeError, Result};
use crate::scalar::Scalar;

/// Scalar entry `(row, col, value)`, 0-based.
pub type Triplet<T> = (usize, usize, T);

/// How a triplet list encodes a symmetric matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// Both triangles are listed; the input is checked for symmetry.
    Full,
    /// One triangle is listed; off-diagonal entries are mirrored.
    Mirror,
}

/// Symmetric matrix stored as dense blocks on a block sparsity pattern.
///
/// Both triangles are stored, so a block row can be read without mirroring.
/// A block stays in the pattern once it is structurally present, even if its
/// values are all zero.
#[derive(Clone, Debug)]
pub struct BlockSparseMatrix<T> {
    partition: BlockPartition,
    pattern: BlockSparsityPattern,
    blocks: Vec<Vec<DenseBlock<T>>>,
}

impl<T: Scalar> BlockSparseMatrix<T> {
    pub fn from_triplets(
        entries: &[Triplet<T>],
        partition: BlockPartition,
        symmetry: Symmetry,
    ) -> Result<Self> {
        let n = partition.dim();
        let mut all: Vec<Triplet<T>> = Vec::with_capacity(entries.len() * 2);
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(CeError::IndexOutOfRange { row: i, col: j, n });
            }
            all.push((i, j, v));
            if symmetry == Symmetry::Mirror && i != j {
                all.push((j, i, v));
            }
        }
        all.sort_unstable_by_key(|&(i, j, _)| (i, j));
        // sum duplicates
        let mut merged: Vec<Triplet<T>> = Vec::with_capacity(all.len());
        for (i, j, v) in all {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }

        if symmetry == Symmetry::Full {
            let scale = merged.iter().fold(T::zero(), |m, e| m.max(e.2.abs()));
            let lookup = |i: usize, j: usize| {
                merged
                    .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
                    .map(|k| merged[k].2)
                    .unwrap_or_else(|_| T::zero())
            };
            let diff = merged
                .iter()
                .map(|&(i, j, v)| (v - lookup(j, i)).abs())
                .fold(T::zero(), T::max);
            let tol = T::lit(T::SYMMETRY_TOL) * scale;
            if diff > tol {
                return Err(CeError::NotSymmetric { diff: diff.as_f64(), tol: tol.as_f64() });
            }
        }

        let m = partition.num_blocks();
        let mut rows: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
        for &(i, j, _) in &merged {
            let (bi, bj) = (partition.block_of(i), partition.block_of(j));
            rows[bi].push(bj);
            rows[bj].push(bi);
        }
        let pattern = BlockSparsityPattern::from_rows(rows)?;
        let mut mat = Self::zeros(partition, pattern);
        for &(i, j, v) in &merged {
            let (bi, bj) = (mat.partition.block_of(i), mat.partition.block_of(j));
            let (oi, oj) = (mat.partition.start(bi), mat.partition.start(bj));
            let blk = mat.block_mut(bi, bj).expect("pattern covers every entry");
            blk[(i - oi, j - oj)] = v;
        }
        if symmetry == Symmetry::Full {
            mat.symmetrize();
        }
        Ok(mat)
    }

    /// All-zero matrix on a given pattern.
    pub fn zeros(partition: BlockPartition, pattern: BlockSparsityPattern) -> Self {
        assert_eq!(partition.num_blocks(), pattern.num_blocks());
        let blocks = (0..pattern.num_blocks())
            .map(|i| {
                pattern
                    .row(i)
                    .iter()
                    .map(|&j| DenseBlock::zeros(partition.block_size(i), partition.block_size(j)))
                    .collect()
            })
            .collect();
        Self { partition, pattern, blocks }
    }

    /// Dense row-major `n × n` input, keeping every block that has a nonzero.
    pub fn from_dense(values: &[T], partition: BlockPartition) -> Result<Self> {
        let n = partition.dim();
        if values.len() != n * n {
            return Err(CeError::LengthMismatch { expected: n * n, got: values.len() });
        }
        let entries: Vec<Triplet<T>> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| values[i * n + j] != T::zero())
            .map(|(i, j)| (i, j, values[i * n + j]))
            .collect();
        Self::from_triplets(&entries, partition, Symmetry::Full)
    }

    #[inline]
    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    #[inline]
    pub fn pattern(&self) -> &BlockSparsityPattern {
        &self.pattern
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&DenseBlock<T>> {
        self.pattern.position(i, j).map(|k| &self.blocks[i][k])
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> Option<&mut DenseBlock<T>> {
        self.pattern.position(i, j).map(move |k| &mut self.blocks[i][k])
    }

    /// Blocks of row `i`, aligned with `pattern().row(i)`.
    pub fn row_blocks(&self, i: usize) -> &[DenseBlock<T>] {
        &self.blocks[i]
    }

    /// Averages each off-diagonal pair and diagonal block with its transpose.
    fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.num_blocks() {
            for k in 0..self.pattern.row(i).len() {
                let j = self.pattern.row(i)[k];
                if j < i {
                    continue;
                }
                let t = self.blocks[j][self.pattern.position(j, i).unwrap()].transpose();
                let blk = &mut self.blocks[i][k];
                for (a, &b) in blk.as_mut_slice().iter_mut().zip(t.as_slice()) {
                    *a = (*a + b) * half;
                }
                let sym = blk.transpose();
                let pos = self.pattern.position(j, i).unwrap();
                self.blocks[j][pos] = sym;
            }
        }
    }

    /// Largest `|block(i,j) - block(j,i)ᵀ|` entry over the matrix.
    pub fn symmetry_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.num_blocks() {
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                let a = &self.blocks[i][k];
                let b = self.block(j, i).expect("structurally symmetric");
                for r in 0..a.rows() {
                    for c in 0..a.cols() {
                        worst = worst.max((a[(r, c)] - b[(c, r)]).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.blocks.iter().flatten().fold(T::zero(), |m, b| m.max(b.max_abs()))
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.dim()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(CeError::LengthMismatch { expected: n, got: x.len() });
        }
        if y.len() != n {
            return Err(CeError::LengthMismatch { expected: n, got: y.len() });
        }
        for i in 0..self.num_blocks() {
            let yi = &mut y[self.partition.range(i)];
            yi.iter_mut().for_each(|v| *v = T::zero());
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                self.blocks[i][k].gemv_add(&x[self.partition.range(j)], yi);
            }
        }
        Ok(())
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n * n];
        for i in 0..self.num_blocks() {
            let oi = self.partition.start(i);
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                let oj = self.partition.start(j);
                let b = &self.blocks[i][k];
                for r in 0..b.rows() {
                    for c in 0..b.cols() {
                        out[(oi + r) * n + oj + c] = b[(r, c)];
                    }
                }
            }
        }
        out
    }

    /// Nonzero entries of the lower triangle (including the diagonal), row-major order.
    pub fn lower_triplets(&self) -> Vec<Triplet<T>> {
        let mut out = Vec::new();
        for i in 0..self.num_blocks() {
            let oi = self.partition.start(i);
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                if j > i {
                    continue;
                }
                let oj = self.partition.start(j);
                let b = &self.blocks[i][k];
                for r in 0..b.rows() {
                    for c in 0..b.cols() {
                        let (gi, gj) = (oi + r, oj + c);
                        if gj <= gi && b[(r, c)] != T::zero() {
                            out.push((gi, gj, b[(r, c)]));
                        }
                    }
                }
            }
        }
        out.sort_unstable_by_key(|&(i, j, _)| (i, j));
        out
    }

    /// Values stored in blocks (both triangles).
    pub fn stored_values(&self) -> usize {
        self.blocks.iter().flatten().map(|b| b.rows() * b.cols()).sum()
    }

    pub fn payload_bytes(&self) -> usize {
        self.stored_values() * std::mem::size_of::<T>()
    }
}
