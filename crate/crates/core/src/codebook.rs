//! Codebooks (item memories) and their text serialization.
//!
//! The text format holds binary codebooks only:
//!
//! ```text
//! GSBC-CODEBOOK v1 d_p=512 b=4 l=128 m=3 factor=0
//! 17 4 99 120
//! 0 0 5 127
//! 63 2 2 81
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{normalize_blocks, Similarity};
use crate::error::{Error, FormatError, Result};
use crate::shape::BlockShape;
use crate::vector::{BinarySbc, Gsbc};

const MAGIC: &str = "GSBC-CODEBOOK";
const VERSION: &str = "v1";

/// Codevector storage; a codebook holds a single format.
#[derive(Debug, Clone, PartialEq)]
pub enum CodeVectors {
    Binary(Vec<BinarySbc>),
    Dense(Vec<Gsbc>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    shape: BlockShape,
    factor: usize,
    vectors: CodeVectors,
}

impl Codebook {
    pub fn binary(shape: BlockShape, factor: usize, vectors: Vec<BinarySbc>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Empty("codebook"));
        }
        for v in &vectors {
            shape.ensure_same(&v.shape())?;
        }
        Ok(Self {
            shape,
            factor,
            vectors: CodeVectors::Binary(vectors),
        })
    }

    pub fn dense(shape: BlockShape, factor: usize, vectors: Vec<Gsbc>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Empty("codebook"));
        }
        for v in &vectors {
            shape.ensure_same(&v.shape())?;
        }
        Ok(Self {
            shape,
            factor,
            vectors: CodeVectors::Dense(vectors),
        })
    }

    /// `m` binary codevectors with i.i.d. uniform offsets.
    pub fn random(shape: BlockShape, m: usize, factor: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(shape, m, factor, &mut rng)
    }

    pub fn random_with<R: rand::Rng + ?Sized>(
        shape: BlockShape,
        m: usize,
        factor: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty("codebook"));
        }
        let vectors = (0..m).map(|_| BinarySbc::random(shape, rng)).collect();
        Self::binary(shape, factor, vectors)
    }

    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    #[inline]
    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn with_factor(mut self, factor: usize) -> Self {
        self.factor = factor;
        self
    }

    pub fn vectors(&self) -> &CodeVectors {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        match &self.vectors {
            CodeVectors::Binary(v) => v.len(),
            CodeVectors::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_binary(&self) -> Option<&[BinarySbc]> {
        match &self.vectors {
            CodeVectors::Binary(v) => Some(v),
            CodeVectors::Dense(_) => None,
        }
    }

    /// Codevector `i` in dense form.
    pub fn gsbc(&self, i: usize) -> Gsbc {
        match &self.vectors {
            CodeVectors::Binary(v) => v[i].to_gsbc(),
            CodeVectors::Dense(v) => v[i].clone(),
        }
    }

    /// Scores `query` against every codevector, writing into `out`.
    ///
    /// Binary codebooks take an `O(B)` path per codevector: with one-hot
    /// codes the ℓ∞ distance of a block only depends on the query value at
    /// the active offset and the largest query value elsewhere.
    pub fn similarities_into(
        &self,
        query: &Gsbc,
        metric: Similarity,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        self.shape.ensure_same(&query.shape())?;
        out.clear();
        match (&self.vectors, metric) {
            (CodeVectors::Binary(codes), Similarity::Linf) => {
                let tops: Vec<TopTwo> = query.blocks().map(TopTwo::of).collect();
                let l = self.shape.block_len();
                let q = query.values();
                out.extend(codes.iter().map(|code| {
                    let mut dist = 0.0f64;
                    for (b, (&o, top)) in code.offsets().iter().zip(&tops).enumerate() {
                        let at = (q[b * l + o as usize] - 1.0).abs();
                        let rest = if o as usize == top.index {
                            top.second
                        } else {
                            top.first
                        };
                        dist = dist.max(at).max(rest);
                    }
                    1.0 - dist
                }));
            }
            (CodeVectors::Binary(codes), Similarity::Dot) => {
                let l = self.shape.block_len();
                let q = query.values();
                let blocks = self.shape.blocks() as f64;
                out.extend(codes.iter().map(|code| {
                    let dot: f64 = code
                        .offsets()
                        .iter()
                        .enumerate()
                        .map(|(b, &o)| q[b * l + o as usize])
                        .sum();
                    dot / blocks
                }));
            }
            (CodeVectors::Dense(codes), metric) => {
                for c in codes {
                    out.push(metric.eval(query, c)?);
                }
            }
        }
        Ok(())
    }

    pub fn similarities(&self, query: &Gsbc, metric: Similarity) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        self.similarities_into(query, metric, &mut out)?;
        Ok(out)
    }

    /// Weighted bundle of the codevectors, normalized per block.
    pub fn weighted_bundle(&self, weights: &[f64]) -> Result<Gsbc> {
        if weights.len() != self.len() {
            return Err(Error::InvalidConfig(format!(
                "{} weights for a codebook of {}",
                weights.len(),
                self.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::ZeroWeights);
        }
        let l = self.shape.block_len();
        let mut acc = vec![0.0; self.shape.dim()];
        match &self.vectors {
            CodeVectors::Binary(codes) => {
                for (code, &w) in codes.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    for (b, &o) in code.offsets().iter().enumerate() {
                        acc[b * l + o as usize] += w;
                    }
                }
            }
            CodeVectors::Dense(codes) => {
                for (code, &w) in codes.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    for (a, &v) in acc.iter_mut().zip(code.values()) {
                        *a += w * v;
                    }
                }
            }
        }
        normalize_blocks(&mut acc, l)?;
        Ok(Gsbc::from_raw(self.shape, acc))
    }

    /// Equal-weight bundle of every codevector.
    pub fn bundle_all(&self) -> Gsbc {
        self.weighted_bundle(&vec![1.0; self.len()])
            .expect("unit weights over a nonempty codebook")
    }

    pub fn to_text(&self) -> Result<String> {
        let codes = self
            .as_binary()
            .ok_or_else(|| Error::InvalidConfig("only binary codebooks have a text form".into()))?;
        let s = self.shape;
        let mut out = format!(
            "{MAGIC} {VERSION} d_p={} b={} l={} m={} factor={}\n",
            s.dim(),
            s.blocks(),
            s.block_len(),
            codes.len(),
            self.factor
        );
        for code in codes {
            let mut first = true;
            for o in code.offsets() {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{o}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| FormatError::MalformedHeader("empty input".into()))?;
        let h = Header::parse(header)?;
        let shape =
            BlockShape::new(h.b, h.l).map_err(|e| FormatError::MalformedHeader(e.to_string()))?;
        if shape.dim() != h.d_p {
            return Err(FormatError::MalformedHeader(format!(
                "d_p={} but b*l={}",
                h.d_p,
                shape.dim()
            ))
            .into());
        }
        if h.m == 0 {
            return Err(FormatError::MalformedHeader("m must be at least 1".into()).into());
        }

        let body: Vec<&str> = lines.filter(|line| !line.trim().is_empty()).collect();
        if body.len() != h.m {
            return Err(FormatError::WrongLineCount {
                expected: h.m,
                found: body.len(),
            }
            .into());
        }
        let mut codes = Vec::with_capacity(h.m);
        for (i, line) in body.iter().enumerate() {
            let line_no = i + 2;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != h.b {
                return Err(FormatError::WrongOffsetCount {
                    line: line_no,
                    expected: h.b,
                    found: tokens.len(),
                }
                .into());
            }
            let mut offsets = Vec::with_capacity(h.b);
            for tok in tokens {
                let o: u64 = tok.parse().map_err(|_| FormatError::BadInteger {
                    line: line_no,
                    token: tok.to_string(),
                })?;
                if o >= h.l as u64 {
                    return Err(FormatError::OffsetOutOfRange {
                        line: line_no,
                        offset: o,
                        l: h.l,
                    }
                    .into());
                }
                offsets.push(o as u32);
            }
            codes.push(BinarySbc::new(shape, offsets)?);
        }
        Self::binary(shape, h.factor, codes)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Shorthand for [`Codebook::random`] with factor index 0.
pub fn random_codebook(shape: BlockShape, m: usize, seed: u64) -> Result<Codebook> {
    Codebook::random(shape, m, 0, seed)
}

/// Largest value of a block, its index, and the largest value elsewhere.
#[derive(Debug, Clone, Copy)]
struct TopTwo {
    first: f64,
    index: usize,
    second: f64,
}

impl TopTwo {
    fn of(block: &[f64]) -> Self {
        let mut t = TopTwo {
            first: f64::NEG_INFINITY,
            index: 0,
            second: f64::NEG_INFINITY,
        };
        for (i, &v) in block.iter().enumerate() {
            if v > t.first {
                t.second = t.first;
                t.first = v;
                t.index = i;
            } else if v > t.second {
                t.second = v;
            }
        }
        t
    }
}

struct Header {
    d_p: usize,
    b: usize,
    l: usize,
    m: usize,
    factor: usize,
}

impl Header {
    fn parse(line: &str) -> std::result::Result<Self, FormatError> {
        let bad = |why: &str| FormatError::MalformedHeader(format!("{why} in {line:?}"));
        let mut parts = line.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(bad("missing magic"));
        }
        if parts.next() != Some(VERSION) {
            return Err(bad("unsupported version"));
        }
        let keys = ["d_p", "b", "l", "m", "factor"];
        let mut vals = [0usize; 5];
        for (key, slot) in keys.iter().zip(vals.iter_mut()) {
            let field = parts.next().ok_or_else(|| bad(&format!("missing {key}")))?;
            let value = field
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| bad(&format!("expected {key}=<int>")))?;
            *slot = value
                .parse()
                .map_err(|_| bad(&format!("invalid {key} value")))?;
        }
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        let [d_p, b, l, m, factor] = vals;
        Ok(Header {
            d_p,
            b,
            l,
            m,
            factor,
        })
    }
}
