use std::path::PathBuf;
use std::process::ExitCode;

use bcf_core::experiment::SweepVariable;
use bcf_core::{EstimateFormat, Schedule, Similarity};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "bcf", version, about = "Block code factorizer experiments")]
struct Cli {
    /// Base seed; every run is a pure function of it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Trials (or queries) per point; each command has its own default.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; rayon's default when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random binary codebook in the GSBC-CODEBOOK v1 format.
    GenCodebook(GenCodebookArgs),
    /// Factorize one product vector and print the result as key=value lines.
    Factorize(FactorizeArgs),
    /// Accuracy and iteration sweep over one variable.
    Sweep(SweepArgs),
    /// Largest size on a ladder that is solved above the target accuracy.
    Capacity(CapacityArgs),
    /// Unconditional sampler mode against its analytic iteration count.
    Sampler(SamplerArgs),
    /// Histograms of the similarity values seen while decoding.
    Histogram(HistogramArgs),
    /// Bayesian (or grid) search over the threshold and sampling width.
    Hyperopt(HyperoptArgs),
    /// Brute-force versus factorizer classification of noisy queries.
    ClassifyBench(ClassifyBenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Linf,
    Dot,
}

impl From<SimilarityArg> for Similarity {
    fn from(s: SimilarityArg) -> Self {
        match s {
            SimilarityArg::Linf => Similarity::Linf,
            SimilarityArg::Dot => Similarity::Dot,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimateArg {
    Gsbc,
    Binary,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Sequential,
    Jacobi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariableArg {
    Size,
    Dim,
    Blocks,
    Factors,
    A,
}

impl From<VariableArg> for SweepVariable {
    fn from(v: VariableArg) -> Self {
        match v {
            VariableArg::Size => SweepVariable::Size,
            VariableArg::Dim => SweepVariable::Dim,
            VariableArg::Blocks => SweepVariable::Blocks,
            VariableArg::Factors => SweepVariable::Factors,
            VariableArg::A => SweepVariable::SamplingWidth,
        }
    }
}

/// Decoder settings shared by the commands that run the factorizer.
#[derive(Debug, Clone, Args)]
struct DecoderArgs {
    /// Sparsifying threshold T.
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    /// Sampling width A; 0 disables sampling.
    #[arg(long, default_value_t = 0)]
    a: usize,
    /// Detection threshold T_c.
    #[arg(long, default_value_t = 0.8)]
    tc: f64,
    /// Iteration cap N; floor(prod M / sum M) when omitted.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum, default_value = "linf")]
    similarity: SimilarityArg,
    #[arg(long, value_enum, default_value = "gsbc")]
    estimate: EstimateArg,
    #[arg(long, value_enum, default_value = "sequential")]
    schedule: ScheduleArg,
}

impl DecoderArgs {
    fn config(&self) -> bcf_core::FactorizerConfig {
        let mut c = bcf_core::FactorizerConfig::default()
            .with_threshold(self.t)
            .with_sampling_width(self.a)
            .with_detection_threshold(self.tc)
            .with_similarity(self.similarity.into())
            .with_estimate_format(match self.estimate {
                EstimateArg::Gsbc => EstimateFormat::Gsbc,
                EstimateArg::Binary => EstimateFormat::Binary,
            })
            .with_schedule(match self.schedule {
                ScheduleArg::Sequential => Schedule::Sequential,
                ScheduleArg::Jacobi => Schedule::Jacobi,
            });
        c.max_iterations = self.max_iters;
        c
    }
}

/// Vector shape.
#[derive(Debug, Clone, Args)]
struct ShapeArgs {
    /// Dimension D_p.
    #[arg(long, default_value_t = 512)]
    d_p: usize,
    /// Number of blocks B.
    #[arg(long, default_value_t = 4)]
    blocks: usize,
}

#[derive(Debug, Args)]
struct GenCodebookArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Number of codevectors.
    #[arg(long)]
    m: usize,
    /// Factor index recorded in the header.
    #[arg(long, default_value_t = 0)]
    factor: usize,
}

#[derive(Debug, Args)]
struct FactorizeArgs {
    /// Codebook files, one per factor; random codebooks when omitted.
    #[arg(long = "codebook")]
    codebooks: Vec<PathBuf>,
    /// Codebook sizes for random codebooks.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 100])]
    sizes: Vec<usize>,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Ground-truth indices; drawn from the seed when omitted.
    #[arg(long, value_delimiter = ',')]
    indices: Option<Vec<usize>>,
    /// Run the unconditional sampler with this width instead.
    #[arg(long)]
    sampler: Option<usize>,
    #[command(flatten)]
    decoder: DecoderArgs,
}

/// Base point of a sweep.
#[derive(Debug, Clone, Args)]
struct PointArgs {
    /// Problem size prod M_f.
    #[arg(long, default_value_t = 10_000)]
    size: u128,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Number of factors F.
    #[arg(long, default_value_t = 2)]
    factors: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "size")]
    variable: VariableArg,
    /// Values of the swept variable.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<u128>,
    #[command(flatten)]
    point: PointArgs,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Decode in unconditional sampler mode (T = T_c = 1/A).
    #[arg(long)]
    sampler: bool,
    /// Use 5000 trials per point instead of 500.
    #[arg(long)]
    full_trials: bool,
    /// Record wall time; otherwise wall_ms is 0 and output is reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct CapacityArgs {
    /// Increasing problem sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    ladder: Vec<u128>,
    #[arg(long, default_value_t = 0.99)]
    target: f64,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 2)]
    factors: usize,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Record wall time in the --out CSV.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct SamplerArgs {
    /// Codebook size per factor.
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 1024)]
    d_p: usize,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 2)]
    factors: usize,
    /// Sampling widths.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 20])]
    widths: Vec<usize>,
    /// Record wall time in the --out CSV.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct HistogramArgs {
    /// Codebook size per factor (two factors).
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 2)]
    iterations: usize,
    #[arg(long, default_value_t = 50)]
    bins: usize,
}

#[derive(Debug, Args)]
struct HyperoptArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Evaluations per search.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 5)]
    searches: usize,
    /// Scan a grid instead of running the Bayesian search.
    #[arg(long)]
    grid: bool,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.002, 0.004, 0.006, 0.008, 0.01])]
    grid_t: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 10, 50, 100])]
    grid_a: Vec<usize>,
}

#[derive(Debug, Args)]
struct ClassifyBenchArgs {
    #[arg(long, default_value_t = 100)]
    classes: usize,
    #[arg(long, default_value_t = 2)]
    factors: usize,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Pre-softmax noise levels.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.25, 0.3])]
    sigmas: Vec<f64>,
    /// Inverse softmax temperature s_F.
    #[arg(long, default_value_t = 1.5)]
    s_f: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
