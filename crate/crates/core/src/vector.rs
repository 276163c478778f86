//! Block-code vector types.
//!
//! [`BinarySbc`] stores one active offset per block and is the exact code
//! format. [`Gsbc`] is the dense relaxation: nonnegative values whose blocks
//! each sum to one. Every binary code is a valid GSBC via [`BinarySbc::to_gsbc`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::shape::BlockShape;

/// Tolerance on the per-block ℓ1 norm of a [`Gsbc`].
pub const GSBC_TOLERANCE: f64 = 1e-9;

/// Binary sparse block code, stored as one offset per block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySbc {
    shape: BlockShape,
    offsets: Vec<u32>,
}

impl BinarySbc {
    pub fn new(shape: BlockShape, offsets: Vec<u32>) -> Result<Self> {
        if offsets.len() != shape.blocks() {
            return Err(Error::InvalidVector(format!(
                "expected {} offsets, got {}",
                shape.blocks(),
                offsets.len()
            )));
        }
        if let Some(&bad) = offsets.iter().find(|&&o| o as usize >= shape.block_len()) {
            return Err(Error::InvalidVector(format!(
                "offset {bad} out of range for block length {}",
                shape.block_len()
            )));
        }
        Ok(Self { shape, offsets })
    }

    /// The identity element of binding: every offset is zero.
    pub fn identity(shape: BlockShape) -> Self {
        Self {
            shape,
            offsets: vec![0; shape.blocks()],
        }
    }

    pub fn random<R: Rng + ?Sized>(shape: BlockShape, rng: &mut R) -> Self {
        let l = shape.block_len() as u32;
        let offsets = (0..shape.blocks())
            .map(|_| rng.random_range(0..l))
            .collect();
        Self { shape, offsets }
    }

    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    #[inline]
    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    /// Modulo-L sum of offsets.
    pub fn bind(&self, other: &BinarySbc) -> Result<BinarySbc> {
        self.shape.ensure_same(&other.shape)?;
        let l = self.shape.block_len() as u32;
        let offsets = self
            .offsets
            .iter()
            .zip(&other.offsets)
            .map(|(&a, &b)| (a + b) % l)
            .collect();
        Ok(Self {
            shape: self.shape,
            offsets,
        })
    }

    /// Modulo-L difference of offsets; exact inverse of [`BinarySbc::bind`].
    pub fn unbind(&self, other: &BinarySbc) -> Result<BinarySbc> {
        self.shape.ensure_same(&other.shape)?;
        let l = self.shape.block_len() as u32;
        let offsets = self
            .offsets
            .iter()
            .zip(&other.offsets)
            .map(|(&a, &b)| (a + l - b) % l)
            .collect();
        Ok(Self {
            shape: self.shape,
            offsets,
        })
    }

    pub fn to_gsbc(&self) -> Gsbc {
        let l = self.shape.block_len();
        let mut values = vec![0.0; self.shape.dim()];
        for (b, &o) in self.offsets.iter().enumerate() {
            values[b * l + o as usize] = 1.0;
        }
        Gsbc {
            shape: self.shape,
            values,
        }
    }
}

/// Generalized sparse block code: nonnegative, unit ℓ1 norm per block.
#[derive(Debug, Clone, PartialEq)]
pub struct Gsbc {
    shape: BlockShape,
    values: Vec<f64>,
}

impl Gsbc {
    /// Validates nonnegativity and per-block normalization.
    pub fn new(shape: BlockShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.dim() {
            return Err(Error::InvalidVector(format!(
                "expected {} values, got {}",
                shape.dim(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(v) = values.iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidVector(format!("negative element {v}")));
        }
        for (b, block) in values.chunks_exact(shape.block_len()).enumerate() {
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > GSBC_TOLERANCE {
                return Err(Error::InvalidVector(format!(
                    "block {b} has l1 norm {sum}, expected 1"
                )));
            }
        }
        Ok(Self { shape, values })
    }

    /// Caller guarantees the invariants hold (up to rounding).
    pub(crate) fn from_raw(shape: BlockShape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.dim());
        Self { shape, values }
    }

    /// Every block uniform at `1/L`.
    pub fn uniform(shape: BlockShape) -> Self {
        let v = 1.0 / shape.block_len() as f64;
        Self {
            shape,
            values: vec![v; shape.dim()],
        }
    }

    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn block(&self, b: usize) -> &[f64] {
        let l = self.shape.block_len();
        &self.values[b * l..(b + 1) * l]
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.shape.block_len())
    }

    /// Checks the invariants against [`GSBC_TOLERANCE`].
    pub fn is_valid(&self) -> bool {
        self.values.iter().all(|&v| v.is_finite() && v >= 0.0)
            && self
                .blocks()
                .all(|blk| (blk.iter().sum::<f64>() - 1.0).abs() <= GSBC_TOLERANCE)
    }

    /// Per-block argmax; the lowest index wins ties.
    pub fn argmax_sparsify(&self) -> BinarySbc {
        let offsets = self.blocks().map(|blk| argmax(blk) as u32).collect();
        BinarySbc {
            shape: self.shape,
            offsets,
        }
    }
}

impl From<&BinarySbc> for Gsbc {
    fn from(x: &BinarySbc) -> Self {
        x.to_gsbc()
    }
}

/// Either storage format, for operations that accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockVector {
    Binary(BinarySbc),
    Dense(Gsbc),
}

impl BlockVector {
    pub fn shape(&self) -> BlockShape {
        match self {
            BlockVector::Binary(x) => x.shape(),
            BlockVector::Dense(x) => x.shape(),
        }
    }

    pub fn to_gsbc(&self) -> Gsbc {
        match self {
            BlockVector::Binary(x) => x.to_gsbc(),
            BlockVector::Dense(x) => x.clone(),
        }
    }
}

impl From<BinarySbc> for BlockVector {
    fn from(x: BinarySbc) -> Self {
        BlockVector::Binary(x)
    }
}

impl From<Gsbc> for BlockVector {
    fn from(x: Gsbc) -> Self {
        BlockVector::Dense(x)
    }
}

/// Index of the maximum; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
