//! Classification as factorization.
//!
//! Classes are assigned to products of codevectors, one per factor. A query
//! is a real-valued vector (in practice the output of a network; here
//! synthesized by corrupting the class product with Gaussian noise) that is
//! passed through a blockwise softmax and then decoded either exhaustively
//! over the class products or with the factorizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::algebra::Similarity;
use crate::error::{Error, Result};
use crate::factorizer::{factorize, FactorizerConfig, ProblemSpec, ProductScorer};
use crate::shape::BlockShape;
use crate::vector::{BinarySbc, Gsbc};

/// Inference temperature used when none is given.
pub const DEFAULT_INVERSE_TEMPERATURE: f64 = 1.5;

/// Sparsification threshold used for soft queries, tuned by grid search at
/// `D=512`, `B=4`, `C=100`.
pub const NOISY_THRESHOLD: f64 = 0.008;

/// Detection threshold for noisy queries.
pub const NOISY_DETECTION_THRESHOLD: f64 = 0.5;

/// Bijection between class ids and codevector tuples.
///
/// Class `y` maps to the mixed-radix digits of `y` over the codebook sizes,
/// factor 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSpaceMap {
    problem: ProblemSpec,
    num_classes: usize,
}

impl ProductSpaceMap {
    pub fn new(problem: ProblemSpec, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidConfig("need at least one class".into()));
        }
        if num_classes as u128 > problem.problem_size() {
            return Err(Error::InvalidConfig(format!(
                "{num_classes} classes exceed the product space of {}",
                problem.problem_size()
            )));
        }
        Ok(Self {
            problem,
            num_classes,
        })
    }

    /// `factors` random codebooks of size `ceil(C^(1/F))`.
    pub fn random(
        shape: BlockShape,
        num_classes: usize,
        factors: usize,
        seed: u64,
    ) -> Result<Self> {
        let m = integer_root_ceil(num_classes as u128, factors) as usize;
        Self::with_sizes(shape, num_classes, &vec![m; factors], seed)
    }

    pub fn with_sizes(
        shape: BlockShape,
        num_classes: usize,
        sizes: &[usize],
        seed: u64,
    ) -> Result<Self> {
        Self::new(ProblemSpec::random(shape, sizes, seed)?, num_classes)
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_to_tuple(&self, class: usize) -> Result<Vec<usize>> {
        self.check_class(class)?;
        let sizes = self.problem.sizes();
        let mut rest = class;
        let mut tuple = vec![0; sizes.len()];
        for (slot, &m) in tuple.iter_mut().zip(&sizes).rev() {
            *slot = rest % m;
            rest /= m;
        }
        Ok(tuple)
    }

    /// Inverse of [`Self::class_to_tuple`]; `None` for tuples past the last class.
    pub fn tuple_to_class(&self, tuple: &[usize]) -> Option<usize> {
        let sizes = self.problem.sizes();
        if tuple.len() != sizes.len() {
            return None;
        }
        let mut class = 0usize;
        for (&i, &m) in tuple.iter().zip(&sizes) {
            if i >= m {
                return None;
            }
            class = class * m + i;
        }
        (class < self.num_classes).then_some(class)
    }

    pub fn class_to_product(&self, class: usize) -> Result<BinarySbc> {
        self.problem.product_binary(&self.class_to_tuple(class)?)
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class < self.num_classes {
            Ok(())
        } else {
            Err(Error::ClassOutOfRange {
                class,
                num_classes: self.num_classes,
            })
        }
    }
}

/// Smallest `m` with `m^f >= n`.
pub fn integer_root_ceil(n: u128, f: usize) -> u128 {
    if n <= 1 || f == 0 {
        return n.max(1);
    }
    let guess = (n as f64).powf(1.0 / f as f64).round() as u128;
    let pow = |m: u128| {
        (0..f)
            .try_fold(1u128, |acc, _| acc.checked_mul(m))
            .unwrap_or(u128::MAX)
    };
    let mut m = guess.saturating_sub(2).max(1);
    while pow(m) < n {
        m += 1;
    }
    m
}

/// Per block, `softmax(s * x_b)`.
pub fn blockwise_softmax(x: &[f64], shape: BlockShape, s: f64) -> Result<Gsbc> {
    if x.len() != shape.dim() {
        return Err(Error::InvalidVector(format!(
            "expected {} values, got {}",
            shape.dim(),
            x.len()
        )));
    }
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "inverse temperature {s} must be positive"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut out = Vec::with_capacity(x.len());
    for block in x.chunks_exact(shape.block_len()) {
        out.extend(softmax(block, s));
    }
    Ok(Gsbc::from_raw(shape, out))
}

fn softmax(block: &[f64], s: f64) -> Vec<f64> {
    let max = block.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(s * v));
    let exps: Vec<f64> = block.iter().map(|&v| (s * v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Loss value with gradients with respect to the logits and the temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct CelGradient {
    pub loss: f64,
    pub grad_q: Vec<f64>,
    pub grad_s: f64,
}

/// Mean over blocks of the categorical cross-entropy of `softmax(s * q_b)`
/// against the target offset of block `b`.
pub fn blockwise_cel(q: &[f64], target: &BinarySbc, s: f64) -> Result<CelGradient> {
    let shape = target.shape();
    if q.len() != shape.dim() {
        return Err(Error::InvalidVector(format!(
            "expected {} logits, got {}",
            shape.dim(),
            q.len()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) || !s.is_finite() {
        return Err(Error::NonFinite);
    }
    let inv_b = 1.0 / shape.blocks() as f64;
    let mut loss = 0.0;
    let mut grad_q = Vec::with_capacity(q.len());
    let mut grad_s = 0.0;
    for (block, &t) in q.chunks_exact(shape.block_len()).zip(target.offsets()) {
        let t = t as usize;
        let max = block.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(s * v));
        let sum: f64 = block.iter().map(|&v| (s * v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - s * block[t];
        // d/dq_i = s (p_i - [i = t]); d/ds = sum_i p_i q_i - q_t
        let mut expected_q = 0.0;
        for (i, &v) in block.iter().enumerate() {
            let p = (s * v - log_z).exp();
            expected_q += p * v;
            let indicator = if i == t { 1.0 } else { 0.0 };
            grad_q.push(inv_b * s * (p - indicator));
        }
        grad_s += expected_q - block[t];
    }
    Ok(CelGradient {
        loss: loss * inv_b,
        grad_q,
        grad_s: grad_s * inv_b,
    })
}

/// Corruption applied to exact class products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyQuerySpec {
    /// Standard deviation of the additive pre-softmax Gaussian noise.
    pub noise_sigma: f64,
    /// Inverse softmax temperature `s_F`.
    pub inverse_temperature: f64,
}

impl Default for NoisyQuerySpec {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            inverse_temperature: DEFAULT_INVERSE_TEMPERATURE,
        }
    }
}

/// The class product plus i.i.d. Gaussian noise, through a blockwise softmax.
pub fn make_noisy_query(
    map: &ProductSpaceMap,
    class: usize,
    spec: &NoisyQuerySpec,
    seed: u64,
) -> Result<Gsbc> {
    if !spec.noise_sigma.is_finite() || spec.noise_sigma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise sigma {} must be nonnegative",
            spec.noise_sigma
        )));
    }
    let product = map.class_to_product(class)?.to_gsbc();
    let mut raw = product.into_values();
    if spec.noise_sigma > 0.0 {
        let normal =
            Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in raw.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    blockwise_softmax(&raw, map.problem().shape(), spec.inverse_temperature)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifyMethod {
    BruteForce,
    Bcf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// Metric for exhaustive search over the class products.
    pub brute_force_similarity: Similarity,
    pub factorizer: FactorizerConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            brute_force_similarity: Similarity::Dot,
            factorizer: FactorizerConfig::default()
                .with_similarity(Similarity::Dot)
                .with_threshold(NOISY_THRESHOLD)
                .with_detection_threshold(NOISY_DETECTION_THRESHOLD),
        }
    }
}

pub fn classify(
    map: &ProductSpaceMap,
    query: &Gsbc,
    method: ClassifyMethod,
    config: &ClassifierConfig,
) -> Result<usize> {
    map.problem().shape().ensure_same(&query.shape())?;
    match method {
        ClassifyMethod::BruteForce => {
            let scorer = ProductScorer::new(query, config.brute_force_similarity);
            nearest_class(map, |p| scorer.score_binary(p))
        }
        ClassifyMethod::Bcf => {
            let result = factorize(map.problem(), query, &config.factorizer)?;
            if let Some(class) = map.tuple_to_class(&result.indices) {
                return Ok(class);
            }
            // Off-map tuple: nearest class product by block overlap.
            let estimate = map.problem().product_binary(&result.indices)?;
            nearest_class(map, |p| {
                p.offsets()
                    .iter()
                    .zip(estimate.offsets())
                    .filter(|(a, b)| a == b)
                    .count() as f64
            })
        }
    }
}

/// First class with the highest score.
fn nearest_class(map: &ProductSpaceMap, mut score: impl FnMut(&BinarySbc) -> f64) -> Result<usize> {
    let mut best = (f64::NEG_INFINITY, 0);
    for class in 0..map.num_classes() {
        let s = score(&map.class_to_product(class)?);
        if s > best.0 {
            best = (s, class);
        }
    }
    Ok(best.1)
}
