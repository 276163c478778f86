//! Bayesian search over the decoder's threshold `T` and sampling width `A`.
//!
//! Each search fits a Gaussian process (RBF kernel) to the error rates seen
//! so far on the unit square `(T, A / min M_f)` and picks the next point by
//! expected improvement over random candidates. Searches score at a
//! shortened iteration cap `N'`; the best point of each search is then
//! re-scored at the full cap `N`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::experiment::{run_trial, DecodeMode};
use crate::factorizer::{default_max_iterations, FactorizerConfig, ProblemSpec};
use crate::seed;

/// Observation noise added to the kernel diagonal.
pub const GP_NOISE: f64 = 1e-3;

/// `N' / N`.
const SHORT_FRACTION: f64 = 0.05;

/// Error rate of `(T, A)` over `trials` random exact queries on `problem`.
///
/// Trial `i` uses `seed::derive(seed, i)`, so calls with the same seed share
/// queries and decoder draws across configurations.
pub fn evaluate_config(
    problem: &ProblemSpec,
    t: f64,
    a: usize,
    trials: usize,
    max_iters: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let config = FactorizerConfig::default()
        .with_threshold(t)
        .with_sampling_width(a)
        .with_max_iterations(max_iters);
    config.validate(problem)?;
    let errors = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, i as u64));
            let outcome = run_trial(problem, &config, DecodeMode::Standard, &mut rng)?;
            Ok::<u64, Error>(!outcome.correct() as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(errors as f64 / trials as f64)
}

#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub problem: ProblemSpec,
    pub trials_per_eval: usize,
    /// Evaluations per search.
    pub budget: usize,
    pub num_searches: usize,
    /// `N'`, the iteration cap while searching.
    pub shortened_max_iters: usize,
    /// `N`, the cap used to rank the finalists.
    pub full_max_iters: usize,
    pub initial_points: usize,
    pub candidates: usize,
}

impl SearchSpec {
    /// 512 trials, 200 evaluations, 5 searches, `N' = floor(0.05 N)`.
    pub fn new(problem: ProblemSpec) -> Self {
        let n = default_max_iterations(&problem.sizes());
        Self {
            problem,
            trials_per_eval: 512,
            budget: 200,
            num_searches: 5,
            shortened_max_iters: shortened(n),
            full_max_iters: n,
            initial_points: 10,
            candidates: 2048,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.trials_per_eval == 0 || self.num_searches == 0 {
            return Err(Error::InvalidConfig(
                "budget, trials per evaluation and searches must be at least 1".into(),
            ));
        }
        if self.shortened_max_iters == 0 || self.full_max_iters == 0 {
            return Err(Error::InvalidConfig(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn max_a(&self) -> usize {
        self.problem.sizes().into_iter().min().unwrap_or(0)
    }
}

/// `floor(0.05 N)`, at least 1.
pub fn shortened(n: usize) -> usize {
    ((n as f64 * SHORT_FRACTION).floor() as usize).max(1)
}

/// One scored configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub search: usize,
    pub t: f64,
    pub a: usize,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_t: f64,
    pub best_a: usize,
    pub error_rate_at_nprime: f64,
    pub error_rate_at_n: f64,
    /// Every evaluation at `N'`, in order.
    pub evaluations: Vec<Evaluation>,
}

impl SearchResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("search,t,a,error_rate\n");
        for e in &self.evaluations {
            let _ = writeln!(out, "{},{},{},{:.6}", e.search, e.t, e.a, e.error_rate);
        }
        out
    }
}

/// Ranks `(error at N, error at N', A, T)` lexicographically.
fn better(a: &(f64, f64, usize, f64), b: &(f64, f64, usize, f64)) -> bool {
    (a.0, a.1, a.2, a.3).partial_cmp(&(b.0, b.1, b.2, b.3)) == Some(std::cmp::Ordering::Less)
}

fn best_of(evals: &[Evaluation]) -> Evaluation {
    *evals
        .iter()
        .min_by(|x, y| {
            (x.error_rate, x.a, x.t)
                .partial_cmp(&(y.error_rate, y.a, y.t))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one evaluation")
}

/// Re-scores each finalist at `N` and keeps the best.
fn finalize(
    spec: &SearchSpec,
    finalists: &[Evaluation],
    evaluations: Vec<Evaluation>,
    seed: u64,
) -> Result<SearchResult> {
    let final_seed = seed::derive(seed, u64::MAX);
    let mut best: Option<(f64, f64, usize, f64)> = None;
    for f in finalists {
        let err_n = evaluate_config(
            &spec.problem,
            f.t,
            f.a,
            spec.trials_per_eval,
            spec.full_max_iters,
            final_seed,
        )?;
        let key = (err_n, f.error_rate, f.a, f.t);
        if best.as_ref().is_none_or(|b| better(&key, b)) {
            best = Some(key);
        }
    }
    let (error_rate_at_n, error_rate_at_nprime, best_a, best_t) =
        best.ok_or_else(|| Error::InvalidConfig("no finalists".into()))?;
    Ok(SearchResult {
        best_t,
        best_a,
        error_rate_at_nprime,
        error_rate_at_n,
        evaluations,
    })
}

/// Runs `num_searches` independent searches and returns the best finalist.
pub fn bayesian_search(spec: &SearchSpec, seed: u64) -> Result<SearchResult> {
    spec.validate()?;
    let max_a = spec.max_a();
    let mut evaluations = Vec::new();
    let mut finalists = Vec::new();
    for s in 0..spec.num_searches {
        let search_seed = seed::derive(seed, s as u64);
        let eval_seed = seed::derive(search_seed, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(search_seed, 1));
        let mut evals: Vec<Evaluation> = Vec::with_capacity(spec.budget);
        let score = |t: f64, a: usize, evals: &mut Vec<Evaluation>| -> Result<()> {
            let error_rate = evaluate_config(
                &spec.problem,
                t,
                a,
                spec.trials_per_eval,
                spec.shortened_max_iters,
                eval_seed,
            )?;
            evals.push(Evaluation {
                search: s,
                t,
                a,
                error_rate,
            });
            Ok(())
        };
        let initial = spec.initial_points.clamp(1, spec.budget);
        score(0.0, 0, &mut evals)?;
        for _ in 1..initial {
            let (t, a) = random_point(&mut rng, max_a);
            score(t, a, &mut evals)?;
        }
        while evals.len() < spec.budget {
            let (t, a) = propose(&evals, max_a, spec.candidates, &mut rng)?;
            score(t, a, &mut evals)?;
        }
        finalists.push(best_of(&evals));
        evaluations.extend(evals);
    }
    finalize(spec, &finalists, evaluations, seed)
}

/// Scores every grid point at `N'` and re-scores the `num_searches` best at `N`.
pub fn grid_search(
    spec: &SearchSpec,
    ts: &[f64],
    as_: &[usize],
    seed: u64,
) -> Result<SearchResult> {
    spec.validate()?;
    if ts.is_empty() || as_.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    let eval_seed = seed::derive(seed, 0);
    let mut evaluations = Vec::with_capacity(ts.len() * as_.len());
    for &t in ts {
        for &a in as_ {
            let error_rate = evaluate_config(
                &spec.problem,
                t,
                a,
                spec.trials_per_eval,
                spec.shortened_max_iters,
                eval_seed,
            )?;
            evaluations.push(Evaluation {
                search: 0,
                t,
                a,
                error_rate,
            });
        }
    }
    let mut ranked = evaluations.clone();
    ranked.sort_by(|x, y| {
        (x.error_rate, x.a, x.t)
            .partial_cmp(&(y.error_rate, y.a, y.t))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    ranked.truncate(spec.num_searches);
    finalize(spec, &ranked, evaluations, seed)
}

fn random_point<R: Rng + ?Sized>(rng: &mut R, max_a: usize) -> (f64, usize) {
    (rng.random::<f64>(), rng.random_range(0..=max_a))
}

fn normalize(t: f64, a: usize, max_a: usize) -> [f64; 2] {
    [
        t,
        if max_a == 0 {
            0.0
        } else {
            a as f64 / max_a as f64
        },
    ]
}

/// Gaussian process posterior over the unit square.
struct Gp {
    xs: Vec<[f64; 2]>,
    inv_len: [f64; 2],
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
}

impl Gp {
    fn fit(xs: Vec<[f64; 2]>, ys: &[f64]) -> Result<Self> {
        let inv_len = median_inverse_lengths(&xs);
        let n = xs.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            rbf(&xs[i], &xs[j], &inv_len) + if i == j { GP_NOISE } else { 0.0 }
        });
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("kernel matrix not positive definite".into()))?;
        let alpha = chol.solve(&DVector::from_column_slice(ys));
        Ok(Self {
            xs,
            inv_len,
            chol,
            alpha,
        })
    }

    fn predict(&self, x: &[f64; 2]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().map(|xi| rbf(xi, x, &self.inv_len)),
        );
        let mean = k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let var = (1.0 - k.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }
}

fn rbf(x: &[f64; 2], y: &[f64; 2], inv_len: &[f64; 2]) -> f64 {
    let d0 = (x[0] - y[0]) * inv_len[0];
    let d1 = (x[1] - y[1]) * inv_len[1];
    (-0.5 * (d0 * d0 + d1 * d1)).exp()
}

/// Per-dimension median of the nonzero pairwise distances; 1 if none.
fn median_inverse_lengths(xs: &[[f64; 2]]) -> [f64; 2] {
    let mut out = [1.0; 2];
    for (d, slot) in out.iter_mut().enumerate() {
        let mut dists: Vec<f64> = Vec::new();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                let v = (xs[i][d] - xs[j][d]).abs();
                if v > 0.0 {
                    dists.push(v);
                }
            }
        }
        if !dists.is_empty() {
            dists.sort_by(f64::total_cmp);
            *slot = 1.0 / dists[dists.len() / 2];
        }
    }
    out
}

/// Expected improvement below `best` for a minimized objective.
fn expected_improvement(mean: f64, sd: f64, best: f64, normal: &Normal) -> f64 {
    if sd <= 0.0 {
        return (best - mean).max(0.0);
    }
    let z = (best - mean) / sd;
    (best - mean) * normal.cdf(z) + sd * normal.pdf(z)
}

fn propose<R: Rng + ?Sized>(
    evals: &[Evaluation],
    max_a: usize,
    candidates: usize,
    rng: &mut R,
) -> Result<(f64, usize)> {
    let ys: Vec<f64> = evals.iter().map(|e| e.error_rate).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let zs: Vec<f64> = ys.iter().map(|y| (y - mean) / sd).collect();
    let best = zs.iter().copied().fold(f64::INFINITY, f64::min);
    let gp = Gp::fit(
        evals.iter().map(|e| normalize(e.t, e.a, max_a)).collect(),
        &zs,
    )?;
    let normal = Normal::standard();

    let mut pick = random_point(rng, max_a);
    let mut pick_ei = f64::NEG_INFINITY;
    for _ in 0..candidates.max(1) {
        let (t, a) = random_point(rng, max_a);
        let (m, s) = gp.predict(&normalize(t, a, max_a));
        let ei = expected_improvement(m, s, best, &normal);
        if ei > pick_ei {
            pick = (t, a);
            pick_ei = ei;
        }
    }
    Ok(pick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::BlockShape;

    fn problem(m: usize) -> ProblemSpec {
        ProblemSpec::random(BlockShape::new(4, 128).unwrap(), &[m, m], 9).unwrap()
    }

    #[test]
    fn shortened_cap() {
        assert_eq!(shortened(500), 25);
        assert_eq!(shortened(16), 1);
        assert_eq!(shortened(1), 1);
        let spec = SearchSpec::new(problem(1000));
        assert_eq!((spec.full_max_iters, spec.shortened_max_iters), (500, 25));
        assert_eq!(
            (spec.trials_per_eval, spec.budget, spec.num_searches),
            (512, 200, 5)
        );
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(evaluate_config(&problem(10), 0.0, 0, 0, 5, 0).is_err());
        assert!(evaluate_config(&problem(10), 0.0, 11, 10, 5, 0).is_err());
    }

    #[test]
    fn easy_problem_has_no_errors() {
        let err = evaluate_config(&problem(100), 0.0, 0, 200, 50, 1).unwrap();
        assert!(err <= 0.01, "error rate {err}");
    }

    #[test]
    fn evaluation_is_deterministic() {
        let p = problem(300);
        let a = evaluate_config(&p, 0.01, 5, 40, 10, 4).unwrap();
        let b = evaluate_config(&p, 0.01, 5, 40, 10, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ei_properties() {
        let n = Normal::standard();
        assert!(expected_improvement(0.0, 1.0, 0.0, &n) > 0.0);
        assert!(expected_improvement(-1.0, 0.5, 0.0, &n) > expected_improvement(1.0, 0.5, 0.0, &n));
        assert_eq!(expected_improvement(1.0, 0.0, 0.0, &n), 0.0);
    }

    #[test]
    fn gp_interpolates_observations() {
        let xs = vec![[0.0, 0.0], [0.5, 0.2], [1.0, 1.0]];
        let ys = [1.0, -1.0, 0.5];
        let gp = Gp::fit(xs.clone(), &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            let (m, s) = gp.predict(x);
            assert!((m - y).abs() < 0.05, "{m} vs {y}");
            assert!(s < 0.1);
        }
        assert!(gp.predict(&[0.5, 0.9]).1 > 0.1);
    }

    #[test]
    fn budget_one_returns_the_origin() {
        let mut spec = SearchSpec::new(problem(30));
        spec.budget = 1;
        spec.num_searches = 1;
        spec.trials_per_eval = 20;
        let r = bayesian_search(&spec, 3).unwrap();
        assert_eq!((r.best_t, r.best_a), (0.0, 0));
        assert_eq!(r.evaluations.len(), 1);
    }

    #[test]
    fn search_stays_in_domain_and_is_deterministic() {
        let mut spec = SearchSpec::new(problem(40));
        spec.budget = 14;
        spec.num_searches = 2;
        spec.trials_per_eval = 16;
        spec.candidates = 128;
        let r = bayesian_search(&spec, 8).unwrap();
        assert_eq!(r.evaluations.len(), 28);
        for e in &r.evaluations {
            assert!((0.0..=1.0).contains(&e.t) && e.a <= 40);
        }
        assert!((0.0..=1.0).contains(&r.error_rate_at_n));
        assert_eq!(r, bayesian_search(&spec, 8).unwrap());
        assert!(r.to_csv().starts_with("search,t,a,error_rate\n"));
    }

    #[test]
    fn grid_search_prefers_smaller_a_on_ties() {
        let mut spec = SearchSpec::new(problem(30));
        spec.trials_per_eval = 30;
        let r = grid_search(&spec, &[0.0], &[0, 1, 2], 0).unwrap();
        assert_eq!(r.best_a, 0);
        assert_eq!(r.evaluations.len(), 3);
    }
}
