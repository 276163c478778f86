//! The block code factorizer.
//!
//! Given a product vector `p = x^1 ⊛ ... ⊛ x^F` and one codebook per factor,
//! the decoder keeps one GSBC estimate per factor and iterates:
//!
//! 1. unbind the other factors' estimates from `p`,
//! 2. score the result against the factor's codebook,
//! 3. zero scores below the threshold `T`; if nothing survives and the
//!    sampling width `A > 0`, put weight `1/A` on `A` random codevectors,
//! 4. replace the estimate by the normalized weighted bundle of codevectors,
//! 5. stop once every factor has a raw score of at least `T_c`, or after `N`
//!    iterations.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{self, Similarity};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::shape::BlockShape;
use crate::vector::{argmax, BinarySbc, Gsbc};

/// Slack on threshold comparisons, so that e.g. `1 - (1 - 1/A) >= 1/A` holds.
pub const THRESHOLD_EPSILON: f64 = 1e-12;

/// Largest product space [`brute_force_factorize`] enumerates.
pub const BRUTE_FORCE_LIMIT: u128 = 100_000_000;

/// Representation of the factor estimates between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateFormat {
    Gsbc,
    /// Estimates are argmax-sparsified back to binary codes every iteration.
    Binary,
}

/// Order in which the factor estimates are refreshed within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// Every factor unbinds the estimates of the previous iteration.
    Jacobi,
    /// Factor `f` unbinds the estimates already refreshed in this iteration
    /// for factors before it.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizerConfig {
    /// Sparsifying threshold `T` in `[0, 1]`.
    pub threshold: f64,
    /// Sampling width `A`; zero disables conditional sampling.
    pub sampling_width: usize,
    /// Detection threshold `T_c` in `[0, 1]`.
    pub detection_threshold: f64,
    /// Iteration cap `N`; `None` uses [`default_max_iterations`].
    pub max_iterations: Option<usize>,
    pub similarity: Similarity,
    pub estimate_format: EstimateFormat,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for FactorizerConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            sampling_width: 0,
            detection_threshold: 0.8,
            max_iterations: None,
            similarity: Similarity::Linf,
            estimate_format: EstimateFormat::Gsbc,
            schedule: Schedule::Sequential,
            seed: 0,
        }
    }
}

impl FactorizerConfig {
    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = t;
        self
    }

    pub fn with_sampling_width(mut self, a: usize) -> Self {
        self.sampling_width = a;
        self
    }

    pub fn with_detection_threshold(mut self, tc: f64) -> Self {
        self.detection_threshold = tc;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = Some(n);
        self
    }

    pub fn with_similarity(mut self, s: Similarity) -> Self {
        self.similarity = s;
        self
    }

    pub fn with_estimate_format(mut self, f: EstimateFormat) -> Self {
        self.estimate_format = f;
        self
    }

    pub fn with_schedule(mut self, s: Schedule) -> Self {
        self.schedule = s;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, problem: &ProblemSpec) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.detection_threshold) {
            return Err(Error::InvalidConfig(format!(
                "detection threshold {} outside [0, 1]",
                self.detection_threshold
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig(
                "max iterations must be at least 1".into(),
            ));
        }
        let min_m = problem.min_codebook_len();
        if self.sampling_width > min_m {
            return Err(Error::InvalidConfig(format!(
                "sampling width {} exceeds the smallest codebook ({min_m})",
                self.sampling_width
            )));
        }
        Ok(())
    }
}

/// Scores of one factor's codebook against its unbound estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityVector {
    pub factor: usize,
    pub scores: Vec<f64>,
}

impl SimilarityVector {
    pub fn max(&self) -> f64 {
        self.scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.scores)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizerResult {
    pub indices: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Codevector comparisons performed.
    pub similarity_searches: u64,
    pub final_scores: Vec<SimilarityVector>,
}

/// A set of `F >= 2` codebooks over a common shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    shape: BlockShape,
    codebooks: Vec<Codebook>,
}

impl ProblemSpec {
    pub fn new(codebooks: Vec<Codebook>) -> Result<Self> {
        if codebooks.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least two factors, got {}",
                codebooks.len()
            )));
        }
        let shape = codebooks[0].shape();
        for cb in &codebooks[1..] {
            shape.ensure_same(&cb.shape())?;
        }
        Ok(Self { shape, codebooks })
    }

    /// Random binary codebooks of the given sizes.
    pub fn random(shape: BlockShape, sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(shape, sizes, &mut rng)
    }

    pub fn random_with<R: rand::Rng + ?Sized>(
        shape: BlockShape,
        sizes: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let codebooks = sizes
            .iter()
            .enumerate()
            .map(|(f, &m)| Codebook::random_with(shape, m, f, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(codebooks)
    }

    #[inline]
    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn num_factors(&self) -> usize {
        self.codebooks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.codebooks.iter().map(Codebook::len).collect()
    }

    /// `prod M_f`.
    pub fn problem_size(&self) -> u128 {
        self.codebooks.iter().map(|c| c.len() as u128).product()
    }

    /// `sum M_f`, the similarity searches per iteration.
    pub fn searches_per_iteration(&self) -> u64 {
        self.codebooks.iter().map(|c| c.len() as u64).sum()
    }

    fn min_codebook_len(&self) -> usize {
        self.codebooks.iter().map(Codebook::len).min().unwrap_or(0)
    }

    fn check_indices(&self, indices: &[usize]) -> Result<()> {
        if indices.len() != self.num_factors() {
            return Err(Error::InvalidConfig(format!(
                "{} indices for {} factors",
                indices.len(),
                self.num_factors()
            )));
        }
        for (&i, cb) in indices.iter().zip(&self.codebooks) {
            if i >= cb.len() {
                return Err(Error::InvalidConfig(format!(
                    "index {i} out of range for codebook of {}",
                    cb.len()
                )));
            }
        }
        Ok(())
    }

    /// Binding of the selected codevectors, for binary codebooks.
    pub fn product_binary(&self, indices: &[usize]) -> Result<BinarySbc> {
        self.check_indices(indices)?;
        let mut acc = BinarySbc::identity(self.shape);
        for (&i, cb) in indices.iter().zip(&self.codebooks) {
            let codes = cb
                .as_binary()
                .ok_or_else(|| Error::InvalidConfig("codebook is not binary".into()))?;
            acc = acc.bind(&codes[i])?;
        }
        Ok(acc)
    }

    /// Binding of the selected codevectors in dense form.
    pub fn product(&self, indices: &[usize]) -> Result<Gsbc> {
        if let Ok(p) = self.product_binary(indices) {
            return Ok(p.to_gsbc());
        }
        self.check_indices(indices)?;
        let mut acc = self.codebooks[0].gsbc(indices[0]);
        for (&i, cb) in indices.iter().zip(&self.codebooks).skip(1) {
            acc = algebra::bind(&acc, &cb.gsbc(i))?;
        }
        Ok(acc)
    }
}

/// `floor(prod M_f / sum M_f)`, at least 1: no more searches than brute force.
pub fn default_max_iterations(sizes: &[usize]) -> usize {
    let prod: u128 = sizes.iter().map(|&m| m as u128).product();
    let sum: u128 = sizes.iter().map(|&m| m as u128).sum();
    if sum == 0 {
        return 1;
    }
    usize::try_from(prod / sum).unwrap_or(usize::MAX).max(1)
}

/// `prod M_f / (sum M_f * A^(F-1))`, the mean iteration count of the
/// unconditional random sampler.
pub fn expected_sampler_iterations(sizes: &[usize], sampling_width: usize) -> f64 {
    let prod: f64 = sizes.iter().map(|&m| m as f64).product();
    let sum: f64 = sizes.iter().map(|&m| m as f64).sum();
    let f = sizes.len() as i32;
    prod / (sum * (sampling_width as f64).powi(f - 1))
}

/// Equal-weight bundle of each codebook.
pub fn init_estimates(problem: &ProblemSpec) -> Vec<Gsbc> {
    problem.codebooks.iter().map(Codebook::bundle_all).collect()
}

pub fn factorize(
    problem: &ProblemSpec,
    query: &Gsbc,
    config: &FactorizerConfig,
) -> Result<FactorizerResult> {
    let estimates = init_estimates(problem);
    Decoder::new(problem, query, config)?.run(estimates, &mut |_, _, _| {})
}

/// [`factorize`] that reports every raw similarity vector as
/// `(iteration, factor, scores)`.
pub fn factorize_observed(
    problem: &ProblemSpec,
    query: &Gsbc,
    config: &FactorizerConfig,
    observer: &mut dyn FnMut(usize, usize, &[f64]),
) -> Result<FactorizerResult> {
    let estimates = init_estimates(problem);
    Decoder::new(problem, query, config)?.run(estimates, observer)
}

/// Unconditional random sampler: every estimate starts as a bundle of
/// `sampling_width` random codevectors and `T = T_c = 1/A`.
pub fn factorize_sampler_mode(
    problem: &ProblemSpec,
    query: &Gsbc,
    sampling_width: usize,
    seed: u64,
) -> Result<FactorizerResult> {
    factorize_sampler_mode_with(
        problem,
        query,
        sampling_width,
        &FactorizerConfig::default().with_seed(seed),
    )
}

/// Sampler mode on top of `base`, whose threshold, detection threshold and
/// sampling width are overridden.
pub fn factorize_sampler_mode_with(
    problem: &ProblemSpec,
    query: &Gsbc,
    sampling_width: usize,
    base: &FactorizerConfig,
) -> Result<FactorizerResult> {
    if sampling_width == 0 || sampling_width > problem.min_codebook_len() {
        return Err(Error::InvalidConfig(format!(
            "sampling width {sampling_width} outside [1, {}]",
            problem.min_codebook_len()
        )));
    }
    let t = 1.0 / sampling_width as f64;
    let config = base
        .clone()
        .with_threshold(t)
        .with_detection_threshold(t)
        .with_sampling_width(sampling_width);
    let mut decoder = Decoder::new(problem, query, &config)?;
    let estimates = problem
        .codebooks
        .iter()
        .map(|cb| decoder.random_bundle(cb, sampling_width))
        .collect::<Result<Vec<_>>>()?;
    decoder.run(estimates, &mut |_, _, _| {})
}

struct Decoder<'a> {
    problem: &'a ProblemSpec,
    query: &'a Gsbc,
    config: &'a FactorizerConfig,
    max_iterations: usize,
    rng: ChaCha8Rng,
}

impl<'a> Decoder<'a> {
    fn new(
        problem: &'a ProblemSpec,
        query: &'a Gsbc,
        config: &'a FactorizerConfig,
    ) -> Result<Self> {
        problem.shape.ensure_same(&query.shape())?;
        if !query.is_valid() {
            return Err(Error::InvalidVector("query is not a valid GSBC".into()));
        }
        config.validate(problem)?;
        let max_iterations = config
            .max_iterations
            .unwrap_or_else(|| default_max_iterations(&problem.sizes()));
        Ok(Self {
            problem,
            query,
            config,
            max_iterations,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    fn random_bundle(&mut self, cb: &Codebook, width: usize) -> Result<Gsbc> {
        let mut weights = vec![0.0; cb.len()];
        let w = 1.0 / width as f64;
        for i in index::sample(&mut self.rng, cb.len(), width) {
            weights[i] = w;
        }
        cb.weighted_bundle(&weights)
    }

    /// `p` unbound by the binding of every estimate except factor `f`'s.
    fn unbind_others(&self, estimates: &[Gsbc], f: usize) -> Result<Gsbc> {
        let mut others = estimates
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .map(|(_, e)| e);
        let first = others.next().expect("at least two factors");
        let mut bound = first.clone();
        for e in others {
            bound = algebra::bind(&bound, e)?;
        }
        algebra::unbind(self.query, &bound)
    }

    fn score(&self, estimates: &[Gsbc], f: usize, out: &mut Vec<f64>) -> Result<()> {
        let unbound = self.unbind_others(estimates, f)?;
        self.problem.codebooks[f].similarities_into(&unbound, self.config.similarity, out)
    }

    /// Threshold, conditional sampling and weighted bundling.
    fn next_estimate(&mut self, f: usize, scores: &[f64]) -> Result<Gsbc> {
        let cb = &self.problem.codebooks[f];
        let t = self.config.threshold - THRESHOLD_EPSILON;
        let mut weights: Vec<f64> = scores
            .iter()
            .map(|&s| if s >= t { s } else { 0.0 })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            let a = self.config.sampling_width;
            if a > 0 {
                weights.fill(0.0);
                let w = 1.0 / a as f64;
                for i in index::sample(&mut self.rng, cb.len(), a) {
                    weights[i] = w;
                }
            } else if scores.iter().any(|&s| s > 0.0) {
                weights.copy_from_slice(scores);
            } else {
                // nothing to go on: restart from the full bundle
                weights.fill(1.0);
            }
        }
        let estimate = cb.weighted_bundle(&weights)?;
        Ok(match self.config.estimate_format {
            EstimateFormat::Gsbc => estimate,
            EstimateFormat::Binary => estimate.argmax_sparsify().to_gsbc(),
        })
    }

    fn run(
        mut self,
        mut estimates: Vec<Gsbc>,
        observer: &mut dyn FnMut(usize, usize, &[f64]),
    ) -> Result<FactorizerResult> {
        let num_factors = self.problem.num_factors();
        let mut scores: Vec<Vec<f64>> = vec![Vec::new(); num_factors];
        let detect = self.config.detection_threshold - THRESHOLD_EPSILON;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.max_iterations {
            iterations += 1;
            match self.config.schedule {
                Schedule::Jacobi => {
                    for (f, s) in scores.iter_mut().enumerate() {
                        self.score(&estimates, f, s)?;
                    }
                    for (f, s) in scores.iter().enumerate() {
                        estimates[f] = self.next_estimate(f, s)?;
                    }
                }
                Schedule::Sequential => {
                    for f in 0..num_factors {
                        let mut s = std::mem::take(&mut scores[f]);
                        self.score(&estimates, f, &mut s)?;
                        estimates[f] = self.next_estimate(f, &s)?;
                        scores[f] = s;
                    }
                }
            }
            for (f, s) in scores.iter().enumerate() {
                observer(iterations, f, s);
            }
            if scores.iter().all(|s| s.iter().any(|&v| v >= detect)) {
                converged = true;
                break;
            }
        }

        let final_scores: Vec<SimilarityVector> = scores
            .into_iter()
            .enumerate()
            .map(|(factor, scores)| SimilarityVector { factor, scores })
            .collect();
        Ok(FactorizerResult {
            indices: final_scores.iter().map(SimilarityVector::argmax).collect(),
            converged,
            iterations,
            similarity_searches: iterations as u64 * self.problem.searches_per_iteration(),
            final_scores,
        })
    }
}

/// Exhaustive search over every factor combination.
///
/// Scores are the similarity between `query` and each bound product; the
/// first best tuple in row-major order (factor 0 slowest) wins. Each
/// returned [`SimilarityVector`] holds, per codevector, the best score of
/// any tuple that uses it.
pub fn brute_force_factorize(
    problem: &ProblemSpec,
    query: &Gsbc,
    similarity: Similarity,
) -> Result<FactorizerResult> {
    problem.shape.ensure_same(&query.shape())?;
    let size = problem.problem_size();
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::ProductSpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let sizes = problem.sizes();
    let mut marginals: Vec<Vec<f64>> = sizes.iter().map(|&m| vec![f64::NEG_INFINITY; m]).collect();
    let mut best = (f64::NEG_INFINITY, vec![0; sizes.len()]);
    let scorer = ProductScorer::new(query, similarity);

    let mut tuple = vec![0usize; sizes.len()];
    loop {
        let s = scorer.score(problem, &tuple)?;
        if s > best.0 {
            best = (s, tuple.clone());
        }
        for (f, &i) in tuple.iter().enumerate() {
            let m = &mut marginals[f][i];
            *m = m.max(s);
        }
        if !advance(&mut tuple, &sizes) {
            break;
        }
    }

    Ok(FactorizerResult {
        indices: best.1,
        converged: true,
        iterations: 0,
        similarity_searches: size as u64,
        final_scores: marginals
            .into_iter()
            .enumerate()
            .map(|(factor, scores)| SimilarityVector { factor, scores })
            .collect(),
    })
}

/// Mixed-radix increment, last factor fastest. Returns false on wrap-around.
pub(crate) fn advance(tuple: &mut [usize], sizes: &[usize]) -> bool {
    for f in (0..tuple.len()).rev() {
        tuple[f] += 1;
        if tuple[f] < sizes[f] {
            return true;
        }
        tuple[f] = 0;
    }
    false
}

/// Scores a query against bound products; binary products skip densification.
pub(crate) struct ProductScorer<'q> {
    query: &'q Gsbc,
    similarity: Similarity,
    tops: Vec<(f64, usize, f64)>,
}

impl<'q> ProductScorer<'q> {
    pub(crate) fn new(query: &'q Gsbc, similarity: Similarity) -> Self {
        let tops = query
            .blocks()
            .map(|blk| {
                let i = argmax(blk);
                let second = blk
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(v));
                (blk[i], i, second)
            })
            .collect();
        Self {
            query,
            similarity,
            tops,
        }
    }

    pub(crate) fn score_binary(&self, product: &BinarySbc) -> f64 {
        let q = self.query.values();
        let l = self.query.shape().block_len();
        match self.similarity {
            Similarity::Linf => {
                let mut dist = 0.0f64;
                for (b, (&o, &(first, idx, second))) in
                    product.offsets().iter().zip(&self.tops).enumerate()
                {
                    let at = (q[b * l + o as usize] - 1.0).abs();
                    let rest = if o as usize == idx { second } else { first };
                    dist = dist.max(at).max(rest);
                }
                1.0 - dist
            }
            Similarity::Dot => {
                let dot: f64 = product
                    .offsets()
                    .iter()
                    .enumerate()
                    .map(|(b, &o)| q[b * l + o as usize])
                    .sum();
                dot / product.offsets().len() as f64
            }
        }
    }

    pub(crate) fn score(&self, problem: &ProblemSpec, tuple: &[usize]) -> Result<f64> {
        match problem.product_binary(tuple) {
            Ok(p) => Ok(self.score_binary(&p)),
            Err(_) => self.similarity.eval(self.query, &problem.product(tuple)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> BlockShape {
        BlockShape::new(4, 128).unwrap()
    }

    #[test]
    fn default_iterations_floor_the_ratio() {
        assert_eq!(default_max_iterations(&[1000, 1000]), 500);
        assert_eq!(default_max_iterations(&[32, 32]), 16);
        assert_eq!(default_max_iterations(&[10, 10, 10]), 33);
        assert_eq!(default_max_iterations(&[1, 1]), 1);
    }

    #[test]
    fn sampler_expectation() {
        assert_eq!(expected_sampler_iterations(&[1000, 1000], 10), 50.0);
        assert_eq!(expected_sampler_iterations(&[1000, 1000], 1), 500.0);
        assert_eq!(expected_sampler_iterations(&[1000, 1000], 1000), 0.5);
        assert!((expected_sampler_iterations(&[100, 100, 100], 10) - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn singleton_problem() {
        let p = ProblemSpec::random(shape(), &[1, 1], 1).unwrap();
        let q = p.product(&[0, 0]).unwrap();
        let r = factorize(&p, &q, &FactorizerConfig::default()).unwrap();
        assert_eq!(r.indices, vec![0, 0]);
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.similarity_searches, 2);
        let bf = brute_force_factorize(&p, &q, Similarity::Linf).unwrap();
        assert_eq!(bf.indices, vec![0, 0]);
    }

    #[test]
    fn init_estimates_are_bundles() {
        let s = BlockShape::new(2, 4).unwrap();
        let codes = (0..4)
            .map(|o| BinarySbc::new(s, vec![o, o]).unwrap())
            .collect();
        let cb = Codebook::binary(s, 0, codes).unwrap();
        let single = Codebook::random(s, 1, 1, 3).unwrap();
        let p = ProblemSpec::new(vec![cb, single.clone()]).unwrap();
        let est = init_estimates(&p);
        assert_eq!(est[0], Gsbc::uniform(s));
        assert_eq!(est[1], single.gsbc(0));

        let big = ProblemSpec::random(shape(), &[50, 50], 4).unwrap();
        assert!(init_estimates(&big).iter().all(Gsbc::is_valid));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ProblemSpec::random(shape(), &[10, 10], 1).unwrap();
        let q = p.product(&[1, 2]).unwrap();
        let bad = |c: FactorizerConfig| factorize(&p, &q, &c).is_err();
        assert!(bad(FactorizerConfig::default().with_threshold(1.5)));
        assert!(bad(
            FactorizerConfig::default().with_detection_threshold(-0.1)
        ));
        assert!(bad(FactorizerConfig::default().with_sampling_width(11)));
        assert!(bad(FactorizerConfig::default().with_max_iterations(0)));
        let other = Gsbc::uniform(BlockShape::new(2, 256).unwrap());
        assert!(factorize(&p, &other, &FactorizerConfig::default()).is_err());
        assert!(factorize_sampler_mode(&p, &q, 0, 0).is_err());
        assert!(factorize_sampler_mode(&p, &q, 11, 0).is_err());
        assert!(ProblemSpec::random(shape(), &[10], 1).is_err());
    }

    #[test]
    fn result_accounting() {
        let p = ProblemSpec::random(shape(), &[40, 30], 2).unwrap();
        let q = p.product(&[5, 7]).unwrap();
        let r = factorize(&p, &q, &FactorizerConfig::default()).unwrap();
        assert_eq!(r.similarity_searches, r.iterations as u64 * 70);
        assert!(r.iterations <= default_max_iterations(&[40, 30]));
        assert_eq!(r.final_scores.len(), 2);
        assert_eq!(r.final_scores[1].scores.len(), 30);
    }

    #[test]
    fn brute_force_guard() {
        let s = BlockShape::new(2, 4).unwrap();
        let cbs = (0..4)
            .map(|f| Codebook::random(s, 101, f, f as u64).unwrap())
            .collect();
        let p = ProblemSpec::new(cbs).unwrap();
        let q = Gsbc::uniform(s);
        assert!(matches!(
            brute_force_factorize(&p, &q, Similarity::Dot),
            Err(Error::ProductSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn advance_enumerates_row_major() {
        let sizes = [2, 3];
        let mut t = vec![0, 0];
        let mut seen = vec![t.clone()];
        while advance(&mut t, &sizes) {
            seen.push(t.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[1], vec![0, 1]);
        assert_eq!(seen[3], vec![1, 0]);
    }
}
