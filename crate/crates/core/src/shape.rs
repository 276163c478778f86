use std::fmt;

use crate::error::{Error, Result};

/// Geometry of a block-code space: `dim = blocks * block_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockShape {
    dim: usize,
    blocks: usize,
    block_len: usize,
}

impl BlockShape {
    /// Builds a shape from the number of blocks and the block length.
    pub fn new(blocks: usize, block_len: usize) -> Result<Self> {
        if blocks < 1 {
            return Err(Error::InvalidShape("need at least one block".into()));
        }
        if block_len < 2 {
            return Err(Error::InvalidShape(format!(
                "block length must be at least 2, got {block_len}"
            )));
        }
        let dim = blocks
            .checked_mul(block_len)
            .ok_or_else(|| Error::InvalidShape("dimension overflows".into()))?;
        Ok(Self {
            dim,
            blocks,
            block_len,
        })
    }

    /// Builds a shape from the total dimension and the number of blocks.
    pub fn from_dim(dim: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || !dim.is_multiple_of(blocks) {
            return Err(Error::InvalidShape(format!(
                "dimension {dim} is not divisible into {blocks} blocks"
            )));
        }
        Self::new(blocks, dim / blocks)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    #[inline]
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub(crate) fn ensure_same(&self, other: &BlockShape) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

impl fmt::Display for BlockShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(d_p={}, b={}, l={})",
            self.dim, self.blocks, self.block_len
        )
    }
}
