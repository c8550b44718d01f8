use std::fmt::Write as _;
use std::path::Path;

use crate::blocksparse::{BlockPartition, Triplet};
use crate::error::{CeError, Result};
use crate::problems::Grid3D;

/// Initial ordering plus the per-level merge schedule.
///
/// `permutation[new] = old`. `levels[l][b]` is the super-block that block `b`
/// of level `l` joins; level `l + 1` therefore has `max + 1` blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoarseningPlan {
    pub permutation: Vec<usize>,
    pub partition: BlockPartition,
    pub levels: Vec<Vec<usize>>,
    pub join: usize,
}

impl CoarseningPlan {
    pub fn new(
        permutation: Vec<usize>,
        partition: BlockPartition,
        levels: Vec<Vec<usize>>,
        join: usize,
    ) -> Result<Self> {
        let plan = Self { permutation, partition, levels, join };
        plan.validate()?;
        Ok(plan)
    }

    /// Natural ordering, uniform blocks, consecutive blocks merged `join` at a time
    /// until one block is left.
    pub fn sequential(n: usize, block: usize, join: usize) -> Result<Self> {
        if join < 2 {
            return Err(CeError::InvalidParameter(format!("join must be at least 2, got {join}")));
        }
        let partition = BlockPartition::uniform(n, block)?;
        let mut levels = Vec::new();
        let mut m = partition.num_blocks();
        while m > 1 {
            levels.push(consecutive_groups(m, join));
            m = m.div_ceil(join);
        }
        Self::new((0..n).collect(), partition, levels, join)
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Block count at each level, starting with the initial partition.
    pub fn block_counts(&self) -> Vec<usize> {
        let mut out = vec![self.partition.num_blocks()];
        for a in &self.levels {
            out.push(a.iter().max().map_or(0, |&g| g + 1));
        }
        out
    }

    /// Level `l` assignment as explicit member lists.
    pub fn groups(&self, level: usize) -> Vec<Vec<usize>> {
        assignment_to_groups(&self.levels[level])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.permutation.len();
        if self.partition.dim() != n {
            return Err(CeError::InvalidPlan(format!(
                "partition covers {} rows but the permutation has {n}",
                self.partition.dim()
            )));
        }
        let mut seen = vec![false; n];
        for &p in &self.permutation {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(CeError::InvalidPlan(format!("permutation is not a bijection (entry {p})")));
            }
        }
        let mut m = self.partition.num_blocks();
        for (l, a) in self.levels.iter().enumerate() {
            if a.len() != m {
                return Err(CeError::InvalidPlan(format!("level {l} assigns {} blocks, expected {m}", a.len())));
            }
            let groups = a.iter().max().map_or(0, |&g| g + 1);
            let mut sizes = vec![0usize; groups];
            for &g in a {
                sizes[g] += 1;
            }
            if sizes.contains(&0) {
                return Err(CeError::InvalidPlan(format!("level {l} leaves a group empty")));
            }
            m = groups;
        }
        Ok(())
    }

    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (new, &old) in self.permutation.iter().enumerate() {
            inv[old] = new;
        }
        inv
    }

    /// Relabels entries given in the original numbering into plan order.
    pub fn permute_triplets<T: Copy>(&self, entries: &[Triplet<T>]) -> Vec<Triplet<T>> {
        let inv = self.inverse_permutation();
        entries.iter().map(|&(i, j, v)| (inv[i], inv[j], v)).collect()
    }

    pub fn permute_vector<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.permutation.iter().map(|&old| x[old]).collect()
    }

    pub fn unpermute_vector<T: Copy + Default>(&self, y: &[T]) -> Vec<T> {
        let mut x = vec![T::default(); y.len()];
        for (new, &old) in self.permutation.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {}",
            self.dim(),
            self.partition.num_blocks(),
            self.levels.len(),
            self.join
        );
        push_line(&mut s, &self.permutation);
        push_line(&mut s, self.partition.offsets());
        for a in &self.levels {
            push_line(&mut s, a);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| CeError::Parse { line: 0, msg: format!("missing {what}") })?;
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| CeError::Parse { line: idx + 1, msg: format!("{what}: {e}") })?;
            Ok((idx + 1, vals))
        };
        let (hl, header) = next("header")?;
        let [n, m, k, join] = header[..] else {
            return Err(CeError::Parse { line: hl, msg: "header must be `N M K J`".into() });
        };
        let expect = |(line, v): (usize, Vec<usize>), len: usize| -> Result<Vec<usize>> {
            if v.len() != len {
                return Err(CeError::Parse { line, msg: format!("expected {len} values, found {}", v.len()) });
            }
            Ok(v)
        };
        let permutation = expect(next("permutation")?, n)?;
        let offsets = expect(next("offsets")?, m + 1)?;
        let partition = BlockPartition::new(offsets)?;
        let mut levels = Vec::with_capacity(k);
        let mut size = m;
        for _ in 0..k {
            let a = expect(next("level assignment")?, size)?;
            size = a.iter().max().map_or(0, |&g| g + 1);
            levels.push(a);
        }
        Self::new(permutation, partition, levels, join)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn push_line(s: &mut String, v: &[usize]) {
    for (k, x) in v.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x}");
    }
    s.push('\n');
}

pub(crate) fn consecutive_groups(m: usize, join: usize) -> Vec<usize> {
    (0..m).map(|b| b / join).collect()
}

pub(crate) fn assignment_to_groups(a: &[usize]) -> Vec<Vec<usize>> {
    let count = a.iter().max().map_or(0, |&g| g + 1);
    let mut groups = vec![Vec::new(); count];
    for (b, &g) in a.iter().enumerate() {
        groups[g].push(b);
    }
    groups
}

fn log2_exact(v: usize) -> Option<u32> {
    v.is_power_of_two().then(|| v.trailing_zeros())
}

/// Tiles the grid into axis-aligned cells of `block` points and builds a merge
/// schedule in which each level halves `log2(join)` axes, cycling x, y, z.
///
/// Cells take factors of two cyclically over the axes, so `block = 8` gives
/// 2×2×2 cells. Axes shorter than the cell extent stop growing, and trailing
/// cells along a non-divisible axis are smaller. Cells are numbered so that
/// every super-block at every level is a contiguous index range.
pub fn geometric_block_ordering(grid: &Grid3D, block: usize, join: usize) -> Result<CoarseningPlan> {
    let bits = log2_exact(block)
        .filter(|&b| b >= 1)
        .ok_or_else(|| CeError::InvalidParameter(format!("block size {block} is not a power of two >= 2")))?;
    let merge_axes = log2_exact(join)
        .filter(|&a| (1..=3).contains(&a))
        .ok_or_else(|| CeError::InvalidParameter(format!("join {join} must be 2, 4 or 8")))?
        as usize;

    let dims = grid.dims();
    let mut cell = [1usize; 3];
    let mut left = bits;
    let mut axis = 0;
    let mut stalled = 0;
    while left > 0 && stalled < 3 {
        if cell[axis] * 2 <= dims[axis] {
            cell[axis] *= 2;
            left -= 1;
            stalled = 0;
        } else {
            stalled += 1;
        }
        axis = (axis + 1) % 3;
    }
    let cells: [usize; 3] = [0, 1, 2].map(|d| dims[d].div_ceil(cell[d]));

    // Merge schedule: which axes are halved at each level.
    let mut extents = cells;
    let mut schedule: Vec<Vec<usize>> = Vec::new();
    let mut cursor = 0;
    while extents.iter().any(|&e| e > 1) {
        let mut picked = Vec::new();
        for step in 0..3 {
            let d = (cursor + step) % 3;
            if extents[d] > 1 && picked.len() < merge_axes {
                picked.push(d);
            }
        }
        cursor = (picked.last().unwrap() + 1) % 3;
        for &d in &picked {
            extents[d] = extents[d].div_ceil(2);
        }
        schedule.push(picked);
    }

    // Coordinates of every cell at every level; level 0 is the cell grid itself.
    let num_cells = cells.iter().product::<usize>();
    let cell_coords = |c: usize| [c % cells[0], (c / cells[0]) % cells[1], c / (cells[0] * cells[1])];
    let coords_by_level: Vec<Vec<[usize; 3]>> = (0..num_cells)
        .map(|c| {
            let mut v = vec![cell_coords(c)];
            for axes in &schedule {
                let mut next = *v.last().unwrap();
                for &d in axes {
                    next[d] /= 2;
                }
                v.push(next);
            }
            v
        })
        .collect();
    let key = |c: usize| -> Vec<[usize; 3]> {
        coords_by_level[c].iter().rev().map(|x| [x[2], x[1], x[0]]).collect()
    };
    let mut order: Vec<usize> = (0..num_cells).collect();
    order.sort_by_cached_key(|&c| key(c));

    // Points: cell by cell, z-y-x inside each cell.
    let mut permutation = Vec::with_capacity(grid.len());
    let mut sizes = Vec::with_capacity(num_cells);
    for &c in &order {
        let cc = cell_coords(c);
        let lo: [usize; 3] = [0, 1, 2].map(|d| cc[d] * cell[d]);
        let hi: [usize; 3] = [0, 1, 2].map(|d| (lo[d] + cell[d]).min(dims[d]));
        let before = permutation.len();
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    permutation.push(grid.index([x, y, z]));
                }
            }
        }
        sizes.push(permutation.len() - before);
    }
    let partition = BlockPartition::from_sizes(&sizes)?;

    // Level l: block index of each cell = rank of its level-l coordinate in order.
    let mut levels = Vec::with_capacity(schedule.len());
    let rank_at = |l: usize| -> Vec<usize> {
        let mut ids = Vec::with_capacity(num_cells);
        let mut current = 0usize;
        for (pos, &c) in order.iter().enumerate() {
            if pos > 0 && coords_by_level[c][l] != coords_by_level[order[pos - 1]][l] {
                current += 1;
            }
            ids.push(current);
        }
        ids
    };
    let mut prev = rank_at(0);
    for l in 1..=schedule.len() {
        let next = rank_at(l);
        let count = prev.last().map_or(0, |&b| b + 1);
        let mut a = vec![0usize; count];
        for (p, n) in prev.iter().zip(&next) {
            a[*p] = *n;
        }
        levels.push(a);
        prev = next;
    }
    CoarseningPlan::new(permutation, partition, levels, join)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksparse::{BlockSparseMatrix, Symmetry};
    use crate::problems::assemble_diffusion_3d;

    #[test]
    fn two_cubed_is_one_block() {
        let plan = geometric_block_ordering(&Grid3D::cube(2).unwrap(), 8, 2).unwrap();
        assert_eq!(plan.partition.num_blocks(), 1);
        assert!(plan.levels.is_empty());
    }

    #[test]
    fn four_cubed_pairs_along_x_first() {
        let g = Grid3D::cube(4).unwrap();
        let plan = geometric_block_ordering(&g, 8, 2).unwrap();
        assert_eq!(plan.partition.num_blocks(), 8);
        assert_eq!(plan.block_counts(), vec![8, 4, 2, 1]);
        // Each level-1 super-block holds two cells differing only in x.
        for members in plan.groups(0) {
            assert_eq!(members.len(), 2);
            let corner = |b: usize| g.coords(plan.permutation[plan.partition.start(b)]);
            let (a, b) = (corner(members[0]), corner(members[1]));
            assert_eq!((a[1], a[2]), (b[1], b[2]));
            assert_eq!(a[0].abs_diff(b[0]), 2);
        }
    }

    #[test]
    fn cells_are_cubes_and_contiguous() {
        let g = Grid3D::cube(4).unwrap();
        let plan = geometric_block_ordering(&g, 8, 2).unwrap();
        for b in 0..plan.partition.num_blocks() {
            let pts: Vec<_> = plan.partition.range(b).map(|p| g.coords(plan.permutation[p])).collect();
            assert_eq!(pts.len(), 8);
            for d in 0..3 {
                let lo = pts.iter().map(|c| c[d]).min().unwrap();
                let hi = pts.iter().map(|c| c[d]).max().unwrap();
                assert_eq!(hi - lo, 1);
            }
        }
    }

    #[test]
    fn super_blocks_span_two_cells_along_merge_axis() {
        let g = Grid3D::cube(16).unwrap();
        let plan = geometric_block_ordering(&g, 8, 2).unwrap();
        let mut members: Vec<Vec<usize>> = (0..plan.partition.num_blocks()).map(|b| vec![b]).collect();
        for l in 0..plan.num_levels() {
            let axis = l % 3;
            let groups = plan.groups(l);
            let mut next = Vec::with_capacity(groups.len());
            for grp in groups {
                let cells: Vec<usize> = grp.iter().flat_map(|&s| members[s].clone()).collect();
                let xs: std::collections::BTreeSet<usize> = cells
                    .iter()
                    .map(|&c| g.coords(plan.permutation[plan.partition.start(c)])[axis] / 2)
                    .collect();
                assert!(xs.len() >= 2, "level {l}");
                next.push(cells);
            }
            members = next;
        }
        assert_eq!(members.len(), 1);
    }

    #[test]
    fn rectangular_and_ragged_grids() {
        let g = Grid3D::new(5, 3, 2).unwrap();
        let plan = geometric_block_ordering(&g, 8, 2).unwrap();
        assert_eq!(plan.dim(), 30);
        assert!(plan.partition.max_block_size() <= 8);
        assert_eq!(*plan.block_counts().last().unwrap(), 1);
        let g = Grid3D::cube(1).unwrap();
        let plan = geometric_block_ordering(&g, 8, 2).unwrap();
        assert_eq!(plan.partition.offsets(), &[0, 1]);
    }

    #[test]
    fn join_eight_merges_all_axes() {
        let plan = geometric_block_ordering(&Grid3D::cube(8).unwrap(), 8, 8).unwrap();
        assert_eq!(plan.block_counts(), vec![64, 8, 1]);
        assert!(geometric_block_ordering(&Grid3D::cube(8).unwrap(), 8, 3).is_err());
        assert!(geometric_block_ordering(&Grid3D::cube(8).unwrap(), 6, 2).is_err());
    }

    #[test]
    fn permutation_preserves_nonzero_count() {
        let g = Grid3D::new(6, 5, 4).unwrap();
        let p = assemble_diffusion_3d::<f64>(&g);
        let plan = geometric_block_ordering(&g, 8, 2).unwrap();
        let permuted = plan.permute_triplets(&p.entries);
        let a = BlockSparseMatrix::from_triplets(&permuted, plan.partition.clone(), Symmetry::Full).unwrap();
        let dense = a.to_dense();
        assert_eq!(dense.iter().filter(|v| **v != 0.0).count(), p.entries.len());
        let x: Vec<f64> = (0..p.n).map(|i| i as f64).collect();
        assert_eq!(plan.unpermute_vector(&plan.permute_vector(&x)), x);
    }

    #[test]
    fn text_round_trip() {
        let plan = geometric_block_ordering(&Grid3D::new(6, 4, 4).unwrap(), 8, 2).unwrap();
        let text = plan.to_text();
        let back = CoarseningPlan::from_text(&text).unwrap();
        assert_eq!(back, plan);
        assert_eq!(back.to_text(), text);
        assert!(CoarseningPlan::from_text("3 1 0 2\n0 1 1\n0 3\n").is_err());
    }

    #[test]
    fn sequential_plan() {
        let plan = CoarseningPlan::sequential(20, 4, 2).unwrap();
        assert_eq!(plan.block_counts(), vec![5, 3, 2, 1]);
        assert_eq!(plan.levels[0], vec![0, 0, 1, 1, 2]);
    }
}
