use crate::error::{CeError, Result};

/// Boolean block pattern of a symmetric block matrix.
///
/// Row `i` lists the block columns `j` with a (structurally) nonzero block
/// `(i, j)`, sorted and unique. Patterns describing matrices also contain every
/// diagonal position; derived patterns such as [`far`](Self::far) do not.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSparsityPattern {
    rows: Vec<Vec<usize>>,
}

impl BlockSparsityPattern {
    /// Builds a pattern from per-row column lists, sorting and deduplicating them.
    /// Fails if a column is out of range or the result is not structurally symmetric.
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Result<Self> {
        let m = rows.len();
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if let Some(&j) = row.last() {
                if j >= m {
                    return Err(CeError::InvalidPattern(format!("column {j} in row {i} >= {m}")));
                }
            }
        }
        let p = Self { rows };
        p.check_symmetric()?;
        Ok(p)
    }

    /// Symmetric pattern from an undirected edge list plus the full diagonal.
    pub fn from_edges(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
        for (i, j) in edges {
            if i >= m || j >= m {
                return Err(CeError::InvalidPattern(format!("edge ({i}, {j}) out of range {m}")));
            }
            rows[i].push(j);
            rows[j].push(i);
        }
        Self::from_rows(rows)
    }

    pub fn identity(m: usize) -> Self {
        Self { rows: (0..m).map(|i| vec![i]).collect() }
    }

    pub fn dense(m: usize) -> Self {
        Self { rows: (0..m).map(|_| (0..m).collect()).collect() }
    }

    pub fn empty(m: usize) -> Self {
        Self { rows: vec![Vec::new(); m] }
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    /// Position of column `j` inside row `i`.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.rows[i].binary_search(&j).ok()
    }

    /// Total number of stored positions (both triangles).
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Number of positions in the lower triangle including the diagonal.
    /// This is the `#bsp` count used by all block-count formulas in the crate.
    pub fn count_lower(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.partition_point(|&j| j <= i))
            .sum()
    }

    /// Largest number of off-diagonal neighbours of any block.
    pub fn max_degree(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.len() - usize::from(r.binary_search(&i).is_ok()))
            .max()
            .unwrap_or(0)
    }

    pub fn has_full_diagonal(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| r.binary_search(&i).is_ok())
    }

    pub fn check_symmetric(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                if !self.contains(j, i) {
                    return Err(CeError::InvalidPattern(format!(
                        "({i}, {j}) present but ({j}, {i}) missing"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `self ⊆ other`
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.num_blocks() == other.num_blocks()
            && self
                .rows
                .iter()
                .enumerate()
                .all(|(i, r)| r.iter().all(|&j| other.contains(i, j)))
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.num_blocks(), other.num_blocks());
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut r: Vec<usize> = a.iter().chain(b).copied().collect();
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        Self { rows }
    }

    pub fn difference(&self, other: &Self) -> Self {
        assert_eq!(self.num_blocks(), other.num_blocks());
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().copied().filter(|&j| !other.contains(i, j)).collect())
            .collect();
        Self { rows }
    }

    /// Boolean square: `(i, j)` present iff some `k` has `(i, k)` and `(k, j)`.
    pub fn square(&self) -> Self {
        let m = self.num_blocks();
        let mut mark = vec![usize::MAX; m];
        let mut rows = Vec::with_capacity(m);
        for i in 0..m {
            let mut row = Vec::new();
            for &k in &self.rows[i] {
                for &j in &self.rows[k] {
                    if mark[j] != i {
                        mark[j] = i;
                        row.push(j);
                    }
                }
            }
            row.sort_unstable();
            rows.push(row);
        }
        Self { rows }
    }

    /// Fill positions: present in the square, absent here. Never contains the diagonal.
    pub fn far(&self) -> Self {
        let mut far = self.square().difference(self);
        for (i, row) in far.rows.iter_mut().enumerate() {
            row.retain(|&j| j != i);
        }
        far
    }

    /// Super-block pattern: `(I, J)` present iff some member pair of `I × J` is.
    pub fn coarsen(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let assignment = group_assignment(self.num_blocks(), groups)?;
        Ok(self.coarsen_by_assignment(&assignment, groups.len()))
    }

    pub(crate) fn coarsen_by_assignment(&self, assignment: &[usize], num_groups: usize) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); num_groups];
        for (i, row) in self.rows.iter().enumerate() {
            let gi = assignment[i];
            rows[gi].extend(row.iter().map(|&j| assignment[j]));
        }
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        Self { rows }
    }
}

/// Inverts a list of groups into a block → group map, checking it is a partition.
pub(crate) fn group_assignment(m: usize, groups: &[Vec<usize>]) -> Result<Vec<usize>> {
    let mut assignment = vec![usize::MAX; m];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(CeError::InvalidGroups(format!("group {g} is empty")));
        }
        for &b in members {
            if b >= m {
                return Err(CeError::InvalidGroups(format!("block {b} out of range {m}")));
            }
            if assignment[b] != usize::MAX {
                return Err(CeError::InvalidGroups(format!("block {b} appears twice")));
            }
            assignment[b] = g;
        }
    }
    if let Some(b) = assignment.iter().position(|&g| g == usize::MAX) {
        return Err(CeError::InvalidGroups(format!("block {b} not covered")));
    }
    Ok(assignment)
}
