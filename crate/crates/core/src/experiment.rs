//! Seeded experiment harness: accuracy and iteration sweeps, capacity
//! search and similarity histograms.
//!
//! Trial `i` of point `p` draws everything (codebooks, ground truth, decoder
//! seed) from `seed::derive(seed::derive(plan.seed, p), i)`, so any split of
//! the trial range over threads or runs merges to the same tallies.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::Similarity;
use crate::error::{Error, Result};
use crate::factorizer::{
    factorize, factorize_observed, factorize_sampler_mode_with, FactorizerConfig, ProblemSpec,
};
use crate::query::integer_root_ceil;
use crate::seed;
use crate::shape::BlockShape;

/// Header of every sweep CSV.
pub const CSV_HEADER: &str =
    "size,d_p,b,f,t,a,accuracy,mean_iters,mean_searches,converged_frac,wall_ms";

/// Trials per point unless overridden.
pub const DEFAULT_TRIALS: usize = 500;

/// One problem setting: size `prod M_f`, dimension, blocks, factors and the
/// decoder's `(T, A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSpec {
    pub size: u128,
    pub d_p: usize,
    pub b: usize,
    pub f: usize,
    pub t: f64,
    pub a: usize,
}

impl PointSpec {
    pub fn shape(&self) -> Result<BlockShape> {
        BlockShape::from_dim(self.d_p, self.b)
    }

    /// Equal codebook sizes `ceil(size^(1/F))`.
    pub fn codebook_sizes(&self) -> Result<Vec<usize>> {
        if self.f < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least two factors, got {}",
                self.f
            )));
        }
        if self.size == 0 {
            return Err(Error::InvalidConfig("problem size must be positive".into()));
        }
        let m = integer_root_ceil(self.size, self.f);
        let m = usize::try_from(m)
            .map_err(|_| Error::InvalidConfig(format!("codebook size {m} too large")))?;
        Ok(vec![m; self.f])
    }
}

/// Quantity varied across the points of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    Size,
    Dim,
    Blocks,
    Factors,
    SamplingWidth,
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "size" => Ok(Self::Size),
            "dim" | "d_p" => Ok(Self::Dim),
            "blocks" | "b" => Ok(Self::Blocks),
            "factors" | "f" => Ok(Self::Factors),
            "a" | "sampling-width" => Ok(Self::SamplingWidth),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep variable '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DecodeMode {
    #[default]
    Standard,
    /// Unconditional random sampler with `T = T_c = 1/A`.
    Sampler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub points: Vec<PointSpec>,
    pub trials: usize,
    pub seed: u64,
    /// Template for every trial; `threshold`, `sampling_width` and `seed`
    /// are overwritten per point and trial.
    pub factorizer: FactorizerConfig,
    pub mode: DecodeMode,
}

impl ExperimentPlan {
    pub fn new(points: Vec<PointSpec>, trials: usize, seed: u64) -> Self {
        Self {
            points,
            trials,
            seed,
            factorizer: FactorizerConfig::default(),
            mode: DecodeMode::Standard,
        }
    }

    /// Points that copy `base` and set `variable` to each value in turn.
    pub fn sweep(
        variable: SweepVariable,
        base: PointSpec,
        values: &[u128],
    ) -> Result<Vec<PointSpec>> {
        values
            .iter()
            .map(|&v| {
                let mut p = base;
                let small = || {
                    usize::try_from(v)
                        .map_err(|_| Error::InvalidConfig(format!("value {v} too large")))
                };
                match variable {
                    SweepVariable::Size => p.size = v,
                    SweepVariable::Dim => p.d_p = small()?,
                    SweepVariable::Blocks => p.b = small()?,
                    SweepVariable::Factors => p.f = small()?,
                    SweepVariable::SamplingWidth => p.a = small()?,
                }
                Ok(p)
            })
            .collect()
    }

    pub fn with_factorizer(mut self, config: FactorizerConfig) -> Self {
        self.factorizer = config;
        self
    }

    pub fn with_mode(mut self, mode: DecodeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidConfig("plan has no sweep points".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        for p in &self.points {
            p.shape()?;
            let sizes = p.codebook_sizes()?;
            if !(0.0..=1.0).contains(&p.t) {
                return Err(Error::InvalidConfig(format!(
                    "threshold {} outside [0, 1]",
                    p.t
                )));
            }
            if p.a > sizes[0] {
                return Err(Error::InvalidConfig(format!(
                    "sampling width {} exceeds codebook size {}",
                    p.a, sizes[0]
                )));
            }
            if self.mode == DecodeMode::Sampler && p.a == 0 {
                return Err(Error::InvalidConfig("sampler mode needs A >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Order-independent trial counts; merging two tallies is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialTally {
    pub trials: u64,
    pub correct: u64,
    pub converged: u64,
    pub iterations: u64,
    pub searches: u64,
}

impl TrialTally {
    pub fn merge(self, other: TrialTally) -> TrialTally {
        TrialTally {
            trials: self.trials + other.trials,
            correct: self.correct + other.correct,
            converged: self.converged + other.converged,
            iterations: self.iterations + other.iterations,
            searches: self.searches + other.searches,
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.ratio(self.correct)
    }

    pub fn mean_iterations(&self) -> f64 {
        self.ratio(self.iterations)
    }

    pub fn mean_searches(&self) -> f64 {
        self.ratio(self.searches)
    }

    pub fn converged_fraction(&self) -> f64 {
        self.ratio(self.converged)
    }

    fn ratio(&self, n: u64) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            n as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub point: PointSpec,
    pub tally: TrialTally,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    /// CSV with [`CSV_HEADER`]. Without `timing` the `wall_ms` column is 0,
    /// which makes the output a pure function of the plan.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let p = &r.point;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                p.size,
                p.d_p,
                p.b,
                p.f,
                p.t,
                p.a,
                r.tally.accuracy(),
                r.tally.mean_iterations(),
                r.tally.mean_searches(),
                r.tally.converged_fraction(),
                if timing { r.wall_ms } else { 0 }
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, timing: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(timing))?;
        Ok(())
    }
}

/// Outcome of one decode against a known ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truth: Vec<usize>,
    pub estimate: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub similarity_searches: u64,
}

impl TrialOutcome {
    pub fn correct(&self) -> bool {
        self.truth == self.estimate
    }

    fn tally(&self) -> TrialTally {
        TrialTally {
            trials: 1,
            correct: self.correct() as u64,
            converged: self.converged as u64,
            iterations: self.iterations as u64,
            searches: self.similarity_searches,
        }
    }
}

/// Draws a ground-truth tuple, binds it into an exact query and decodes it.
pub fn run_trial<R: Rng + ?Sized>(
    problem: &ProblemSpec,
    config: &FactorizerConfig,
    mode: DecodeMode,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let truth: Vec<usize> = problem
        .sizes()
        .iter()
        .map(|&m| rng.random_range(0..m))
        .collect();
    let query = problem.product(&truth)?;
    let config = config.clone().with_seed(rng.next_u64());
    let result = match mode {
        DecodeMode::Standard => factorize(problem, &query, &config)?,
        DecodeMode::Sampler => {
            factorize_sampler_mode_with(problem, &query, config.sampling_width, &config)?
        }
    };
    Ok(TrialOutcome {
        truth,
        estimate: result.indices,
        converged: result.converged,
        iterations: result.iterations,
        similarity_searches: result.similarity_searches,
    })
}

fn point_config(plan: &ExperimentPlan, point: &PointSpec) -> FactorizerConfig {
    plan.factorizer
        .clone()
        .with_threshold(point.t)
        .with_sampling_width(point.a)
}

/// Runs trials `range` of point `point` with fresh codebooks per trial.
pub fn run_trials(plan: &ExperimentPlan, point: usize, range: Range<usize>) -> Result<TrialTally> {
    let spec = plan
        .points
        .get(point)
        .ok_or_else(|| Error::InvalidConfig(format!("no sweep point {point}")))?;
    let shape = spec.shape()?;
    let sizes = spec.codebook_sizes()?;
    let config = point_config(plan, spec);
    let point_seed = seed::derive(plan.seed, point as u64);
    range
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(point_seed, trial as u64));
            let problem = ProblemSpec::random_with(shape, &sizes, &mut rng)?;
            Ok(run_trial(&problem, &config, plan.mode, &mut rng)?.tally())
        })
        .try_reduce(TrialTally::default, |a, b| Ok(a.merge(b)))
}

fn run_point(plan: &ExperimentPlan, point: usize) -> Result<ReportRow> {
    let start = Instant::now();
    let tally = run_trials(plan, point, 0..plan.trials)?;
    Ok(ReportRow {
        point: plan.points[point],
        tally,
        wall_ms: start.elapsed().as_millis(),
    })
}

pub fn run_sweep(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let rows = (0..plan.points.len())
        .map(|p| run_point(plan, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Largest passing size, `None` when the first rung fails.
    pub capacity: Option<u128>,
    /// Rungs evaluated, up to and including the first failure.
    pub report: ExperimentReport,
}

/// Walks the plan's points as a size ladder and stops at the first rung
/// whose accuracy is not above `target`.
pub fn find_capacity(plan: &ExperimentPlan, target: f64) -> Result<CapacityResult> {
    plan.validate()?;
    let mut report = ExperimentReport::default();
    let mut capacity = None;
    for p in 0..plan.points.len() {
        let row = run_point(plan, p)?;
        let pass = row.tally.accuracy() > target;
        let size = row.point.size;
        report.rows.push(row);
        if !pass {
            break;
        }
        capacity = Some(size);
    }
    Ok(CapacityResult { capacity, report })
}

/// Similarity values split into an exact-zero bin and `bins` equal-width
/// bins over `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub zero: u64,
    pub bins: Vec<u64>,
    /// Number of values equal to 1 (up to rounding).
    pub ones: u64,
}

impl Histogram {
    pub fn new(bins: usize) -> Self {
        Self {
            zero: 0,
            bins: vec![0; bins.max(1)],
            ones: 0,
        }
    }

    pub fn add(&mut self, v: f64) {
        if v >= 1.0 - 1e-12 {
            self.ones += 1;
        }
        if v <= 0.0 {
            self.zero += 1;
            return;
        }
        let n = self.bins.len();
        let i = ((v * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.bins[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.zero + self.bins.iter().sum::<u64>()
    }

    /// True when no nonzero bin holds more values than the zero bin.
    pub fn zero_is_mode(&self) -> bool {
        self.bins.iter().all(|&c| c <= self.zero)
    }

    /// `lower,upper,count` rows; the zero bin is `0,0,count`.
    pub fn to_csv(&self, metric: &str) -> String {
        let n = self.bins.len() as f64;
        let mut out = format!("metric,lower,upper,count\n{metric},0,0,{}\n", self.zero);
        for (i, c) in self.bins.iter().enumerate() {
            let _ = writeln!(out, "{metric},{},{},{c}", i as f64 / n, (i + 1) as f64 / n);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityHistograms {
    pub linf: Histogram,
    pub dot: Histogram,
}

/// Records every codebook similarity seen during `iterations` decode
/// iterations, once with each metric driving the decoder (`T = 0`).
pub fn similarity_histogram(
    problem: &ProblemSpec,
    iterations: usize,
    trials: usize,
    bins: usize,
    seed: u64,
) -> Result<SimilarityHistograms> {
    if trials == 0 || iterations == 0 {
        return Err(Error::InvalidConfig(
            "trials and iterations must be at least 1".into(),
        ));
    }
    let run = |metric: Similarity| -> Result<Histogram> {
        let config = FactorizerConfig::default()
            .with_similarity(metric)
            .with_detection_threshold(1.0)
            .with_max_iterations(iterations);
        let mut hist = Histogram::new(bins);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, trial as u64));
            let truth: Vec<usize> = problem
                .sizes()
                .iter()
                .map(|&m| rng.random_range(0..m))
                .collect();
            let query = problem.product(&truth)?;
            factorize_observed(problem, &query, &config, &mut |_, _, scores| {
                scores.iter().for_each(|&v| hist.add(v))
            })?;
        }
        Ok(hist)
    };
    Ok(SimilarityHistograms {
        linf: run(Similarity::Linf)?,
        dot: run(Similarity::Dot)?,
    })
}
