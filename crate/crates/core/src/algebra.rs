//! Binding, unbinding, bundling and similarity over block codes.
//!
//! Dense binding is blockwise circular convolution and unbinding is blockwise
//! circular correlation, both evaluated directly in `O(L^2)` per block. Zero
//! entries are skipped, so sparse operands (binary queries, thresholded
//! estimates) cost proportionally less.

use crate::error::{Error, Result};
use crate::vector::{BinarySbc, BlockVector, Gsbc};

/// Similarity metric used by the associative search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Similarity {
    /// `1 - max_i |x[i] - y[i]|`.
    Linf,
    /// Inner product divided by the number of blocks.
    Dot,
}

impl Similarity {
    pub fn eval(self, x: &Gsbc, y: &Gsbc) -> Result<f64> {
        match self {
            Similarity::Linf => sim_linf(x, y),
            Similarity::Dot => sim_dot(x, y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Linf => "linf",
            Similarity::Dot => "dot",
        }
    }
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linf" => Ok(Similarity::Linf),
            "dot" => Ok(Similarity::Dot),
            other => Err(Error::InvalidConfig(format!(
                "unknown similarity {other:?}"
            ))),
        }
    }
}

/// Blockwise circular convolution; `c[k] = sum_j x[j] y[(k - j) mod L]`.
pub(crate) fn convolve_into(x: &[f64], y: &[f64], out: &mut [f64]) {
    let l = x.len();
    out.fill(0.0);
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let (head, tail) = y.split_at(l - j);
        for (o, &v) in out[j..].iter_mut().zip(head) {
            *o += xj * v;
        }
        for (o, &v) in out[..j].iter_mut().zip(tail) {
            *o += xj * v;
        }
    }
}

/// Blockwise circular correlation; `c[k] = sum_j p[(j + k) mod L] y[j]`.
///
/// Iterates over the nonzeros of whichever operand is sparser.
pub(crate) fn correlate_into(p: &[f64], y: &[f64], out: &mut [f64]) {
    let l = p.len();
    out.fill(0.0);
    let nnz_p = p.iter().filter(|&&v| v != 0.0).count();
    let nnz_y = y.iter().filter(|&&v| v != 0.0).count();
    if nnz_y <= nnz_p {
        // c[k] += y[j] * p[j + k]
        for (j, &yj) in y.iter().enumerate() {
            if yj == 0.0 {
                continue;
            }
            let (left, right) = p.split_at(j);
            for (o, &v) in out.iter_mut().zip(right) {
                *o += yj * v;
            }
            for (o, &v) in out[l - j..].iter_mut().zip(left) {
                *o += yj * v;
            }
        }
    } else {
        // c[k] += p[m] * y[(m - k) mod L], i.e. y reversed around m
        for (m, &pm) in p.iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            for k in 0..=m {
                out[k] += pm * y[m - k];
            }
            for k in m + 1..l {
                out[k] += pm * y[m + l - k];
            }
        }
    }
}

fn blockwise(x: &Gsbc, y: &Gsbc, op: fn(&[f64], &[f64], &mut [f64])) -> Result<Gsbc> {
    x.shape().ensure_same(&y.shape())?;
    let shape = x.shape();
    let mut out = vec![0.0; shape.dim()];
    for ((xb, yb), ob) in x
        .blocks()
        .zip(y.blocks())
        .zip(out.chunks_exact_mut(shape.block_len()))
    {
        op(xb, yb, ob);
    }
    Ok(Gsbc::from_raw(shape, out))
}

/// Blockwise circular convolution of two GSBCs.
pub fn bind(x: &Gsbc, y: &Gsbc) -> Result<Gsbc> {
    blockwise(x, y, convolve_into)
}

/// Blockwise circular correlation: recovers `x` from `bind(x, y)` when `y` is binary.
pub fn unbind(p: &Gsbc, y: &Gsbc) -> Result<Gsbc> {
    blockwise(p, y, correlate_into)
}

/// Format-aware binding: binary operands stay binary.
pub fn bind_any(x: &BlockVector, y: &BlockVector) -> Result<BlockVector> {
    match (x, y) {
        (BlockVector::Binary(a), BlockVector::Binary(b)) => a.bind(b).map(BlockVector::Binary),
        _ => bind(&x.to_gsbc(), &y.to_gsbc()).map(BlockVector::Dense),
    }
}

/// Format-aware unbinding: binary operands stay binary.
pub fn unbind_any(p: &BlockVector, y: &BlockVector) -> Result<BlockVector> {
    match (p, y) {
        (BlockVector::Binary(a), BlockVector::Binary(b)) => a.unbind(b).map(BlockVector::Binary),
        _ => unbind(&p.to_gsbc(), &y.to_gsbc()).map(BlockVector::Dense),
    }
}

/// Weighted sum with per-block renormalization.
pub fn bundle(vectors: &[&Gsbc], weights: &[f64]) -> Result<Gsbc> {
    let first = vectors.first().ok_or(Error::Empty("bundle input"))?;
    if weights.len() != vectors.len() {
        return Err(Error::InvalidConfig(format!(
            "{} weights for {} vectors",
            weights.len(),
            vectors.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::ZeroWeights);
    }
    let shape = first.shape();
    let mut acc = vec![0.0; shape.dim()];
    for (v, &w) in vectors.iter().zip(weights) {
        shape.ensure_same(&v.shape())?;
        if w == 0.0 {
            continue;
        }
        for (a, &x) in acc.iter_mut().zip(v.values()) {
            *a += w * x;
        }
    }
    normalize_blocks(&mut acc, shape.block_len())?;
    Ok(Gsbc::from_raw(shape, acc))
}

/// Rescales every block to unit ℓ1 norm.
pub(crate) fn normalize_blocks(values: &mut [f64], block_len: usize) -> Result<()> {
    for block in values.chunks_exact_mut(block_len) {
        let sum: f64 = block.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::ZeroWeights);
        }
        let inv = 1.0 / sum;
        block.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(())
}

/// Per block, the most frequent offset; lowest offset wins ties.
pub fn bundle_binary(vectors: &[&BinarySbc]) -> Result<BinarySbc> {
    let first = vectors.first().ok_or(Error::Empty("bundle input"))?;
    let shape = first.shape();
    let mut counts = vec![0u32; shape.block_len()];
    let mut offsets = Vec::with_capacity(shape.blocks());
    for v in vectors {
        shape.ensure_same(&v.shape())?;
    }
    for b in 0..shape.blocks() {
        counts.fill(0);
        for v in vectors {
            counts[v.offsets()[b] as usize] += 1;
        }
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        offsets.push(best as u32);
    }
    BinarySbc::new(shape, offsets)
}

/// `1 - max_i |x[i] - y[i]|`, in `[0, 1]` for valid GSBCs.
pub fn sim_linf(x: &Gsbc, y: &Gsbc) -> Result<f64> {
    x.shape().ensure_same(&y.shape())?;
    let max = x
        .values()
        .iter()
        .zip(y.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(1.0 - max)
}

/// Inner product divided by the number of blocks.
pub fn sim_dot(x: &Gsbc, y: &Gsbc) -> Result<f64> {
    x.shape().ensure_same(&y.shape())?;
    let dot: f64 = x.values().iter().zip(y.values()).map(|(a, b)| a * b).sum();
    Ok(dot / x.shape().blocks() as f64)
}
