use crate::error::{CeError, Result};

/// Split of the scalar index range `0..N` into `M` consecutive blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    offsets: Vec<usize>,
}

impl BlockPartition {
    /// Offsets must start at 0 and be strictly increasing; the last one is `N`.
    pub fn new(offsets: Vec<usize>) -> Result<Self> {
        if offsets.first() != Some(&0) {
            return Err(CeError::InvalidPartition("offsets must start at 0".into()));
        }
        if offsets.len() == 1 {
            return Ok(Self { offsets });
        }
        if let Some(w) = offsets.windows(2).find(|w| w[0] >= w[1]) {
            return Err(CeError::InvalidPartition(format!(
                "offsets not strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { offsets })
    }

    /// Blocks of size `block`, the trailing one possibly smaller.
    pub fn uniform(n: usize, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(CeError::InvalidPartition("block size must be positive".into()));
        }
        let mut offsets: Vec<usize> = (0..n).step_by(block).collect();
        offsets.push(n);
        if n == 0 {
            offsets = vec![0];
        }
        Self::new(offsets)
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        let mut acc = 0;
        for &s in sizes {
            acc += s;
            offsets.push(acc);
        }
        Self::new(offsets)
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    #[inline]
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub fn start(&self, i: usize) -> usize {
        self.offsets[i]
    }

    #[inline]
    pub fn block_size(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    #[inline]
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn max_block_size(&self) -> usize {
        (0..self.num_blocks()).map(|i| self.block_size(i)).max().unwrap_or(0)
    }

    /// Block containing scalar row `row`.
    pub fn block_of(&self, row: usize) -> usize {
        debug_assert!(row < self.dim());
        self.offsets.partition_point(|&o| o <= row) - 1
    }

    /// Checks every block against a configured maximum size.
    pub fn check_max_block(&self, max_block: usize) -> Result<()> {
        match (0..self.num_blocks()).find(|&i| self.block_size(i) > max_block) {
            Some(i) => Err(CeError::InvalidPartition(format!(
                "block {i} has size {} > {max_block}",
                self.block_size(i)
            ))),
            None => Ok(()),
        }
    }
}
