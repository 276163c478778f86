use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use bcf_core::experiment::{
    find_capacity, run_sweep, similarity_histogram, DecodeMode, ExperimentPlan, PointSpec,
    DEFAULT_TRIALS,
};
use bcf_core::hyperopt::{bayesian_search, grid_search, SearchSpec};
use bcf_core::query::{
    classify, make_noisy_query, ClassifierConfig, ClassifyMethod, NoisyQuerySpec, ProductSpaceMap,
};
use bcf_core::{
    expected_sampler_iterations, factorize, factorize_sampler_mode_with, seed, BlockShape,
    Codebook, ProblemSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{
    CapacityArgs, ClassifyBenchArgs, Cli, Command, FactorizeArgs, GenCodebookArgs, HistogramArgs,
    HyperoptArgs, SamplerArgs, ShapeArgs, SweepArgs,
};

const FULL_TRIALS: usize = 5000;

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    if cli.trials == Some(0) {
        bail!("--trials must be at least 1");
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::GenCodebook(a) => gen_codebook(&cli, a, out),
        Command::Factorize(a) => factorize_cmd(&cli, a, out),
        Command::Sweep(a) => sweep(&cli, a, out),
        Command::Capacity(a) => capacity(&cli, a, out),
        Command::Sampler(a) => sampler(&cli, a, out),
        Command::Histogram(a) => histogram(&cli, a, out),
        Command::Hyperopt(a) => hyperopt(&cli, a, out),
        Command::ClassifyBench(a) => classify_bench(&cli, a, out),
    }
}

/// Writes to `out`, or stdout when it is `None`.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn shape(s: &ShapeArgs) -> Result<BlockShape> {
    Ok(BlockShape::from_dim(s.d_p, s.blocks)?)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn gen_codebook(cli: &Cli, a: &GenCodebookArgs, out: Option<&Path>) -> Result<()> {
    ensure!(a.m >= 1, "--m must be at least 1");
    let cb = Codebook::random(shape(&a.shape)?, a.m, a.factor, cli.seed)?;
    emit(out, &cb.to_text()?)
}

fn factorize_cmd(cli: &Cli, a: &FactorizeArgs, out: Option<&Path>) -> Result<()> {
    let problem = if a.codebooks.is_empty() {
        ProblemSpec::random(shape(&a.shape)?, &a.sizes, cli.seed)?
    } else {
        let books = a
            .codebooks
            .iter()
            .enumerate()
            .map(|(f, p)| {
                Codebook::read_file(p)
                    .map(|cb| cb.with_factor(f))
                    .with_context(|| format!("reading {}", p.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        ProblemSpec::new(books)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cli.seed, 1));
    let truth = match &a.indices {
        Some(i) => i.clone(),
        None => problem
            .sizes()
            .iter()
            .map(|&m| rng.random_range(0..m))
            .collect(),
    };
    let query = problem.product(&truth)?;
    let config = a.decoder.config().with_seed(rng.random());
    let r = match a.sampler {
        Some(width) => factorize_sampler_mode_with(&problem, &query, width, &config)?,
        None => factorize(&problem, &query, &config)?,
    };
    let maxima: Vec<String> = r
        .final_scores
        .iter()
        .map(|s| format!("{:.6}", s.max()))
        .collect();
    let mut text = String::new();
    writeln!(text, "truth={}", join(&truth))?;
    writeln!(text, "indices={}", join(&r.indices))?;
    writeln!(text, "correct={}", r.indices == truth)?;
    writeln!(text, "converged={}", r.converged)?;
    writeln!(text, "iterations={}", r.iterations)?;
    writeln!(text, "similarity_searches={}", r.similarity_searches)?;
    writeln!(text, "final_max={}", maxima.join(","))?;
    emit(out, &text)
}

fn sweep(cli: &Cli, a: &SweepArgs, out: Option<&Path>) -> Result<()> {
    let base = PointSpec {
        size: a.point.size,
        d_p: a.point.shape.d_p,
        b: a.point.shape.blocks,
        f: a.point.factors,
        t: a.decoder.t,
        a: a.decoder.a,
    };
    let trials = match (a.full_trials, cli.trials) {
        (_, Some(n)) => n,
        (true, None) => FULL_TRIALS,
        (false, None) => DEFAULT_TRIALS,
    };
    let points = ExperimentPlan::sweep(a.variable.into(), base, &a.values)?;
    let mode = if a.sampler {
        DecodeMode::Sampler
    } else {
        DecodeMode::Standard
    };
    let plan = ExperimentPlan::new(points, trials, cli.seed)
        .with_factorizer(a.decoder.config())
        .with_mode(mode);
    emit(out, &run_sweep(&plan)?.to_csv(a.timing))
}

fn capacity(cli: &Cli, a: &CapacityArgs, out: Option<&Path>) -> Result<()> {
    ensure!(
        a.ladder.windows(2).all(|w| w[0] < w[1]),
        "--ladder must be strictly increasing"
    );
    let points = a
        .ladder
        .iter()
        .map(|&size| PointSpec {
            size,
            d_p: a.shape.d_p,
            b: a.shape.blocks,
            f: a.factors,
            t: a.decoder.t,
            a: a.decoder.a,
        })
        .collect();
    let plan = ExperimentPlan::new(points, cli.trials.unwrap_or(DEFAULT_TRIALS), cli.seed)
        .with_factorizer(a.decoder.config());
    let result = find_capacity(&plan, a.target)?;
    if out.is_some() {
        emit(out, &result.report.to_csv(a.timing))?;
    }
    match result.capacity {
        Some(c) => println!("capacity={c}"),
        None => println!("capacity=none"),
    }
    Ok(())
}

fn sampler(cli: &Cli, a: &SamplerArgs, out: Option<&Path>) -> Result<()> {
    ensure!(!a.widths.is_empty(), "--widths must not be empty");
    let size = (a.m as u128)
        .checked_pow(a.factors as u32)
        .context("problem size overflows")?;
    let points = a
        .widths
        .iter()
        .map(|&w| PointSpec {
            size,
            d_p: a.d_p,
            b: a.blocks,
            f: a.factors,
            t: if w == 0 { 0.0 } else { 1.0 / w as f64 },
            a: w,
        })
        .collect();
    let plan = ExperimentPlan::new(points, cli.trials.unwrap_or(DEFAULT_TRIALS), cli.seed)
        .with_mode(DecodeMode::Sampler);
    let report = run_sweep(&plan)?;
    let sizes = vec![a.m; a.factors];
    for row in &report.rows {
        println!(
            "a={} empirical={:.3} analytic={:.3} accuracy={:.4}",
            row.point.a,
            row.tally.mean_iterations(),
            expected_sampler_iterations(&sizes, row.point.a),
            row.tally.accuracy()
        );
    }
    if out.is_some() {
        emit(out, &report.to_csv(a.timing))?;
    }
    Ok(())
}

fn histogram(cli: &Cli, a: &HistogramArgs, out: Option<&Path>) -> Result<()> {
    let problem = ProblemSpec::random(shape(&a.shape)?, &[a.m, a.m], cli.seed)?;
    let h = similarity_histogram(
        &problem,
        a.iterations,
        cli.trials.unwrap_or(100),
        a.bins,
        cli.seed,
    )?;
    let mut text = h.linf.to_csv("linf");
    text.push_str(
        h.dot
            .to_csv("dot")
            .split_once('\n')
            .map_or("", |(_, rest)| rest),
    );
    emit(out, &text)
}

fn hyperopt(cli: &Cli, a: &HyperoptArgs, out: Option<&Path>) -> Result<()> {
    let point = PointSpec {
        size: a.point.size,
        d_p: a.point.shape.d_p,
        b: a.point.shape.blocks,
        f: a.point.factors,
        t: 0.0,
        a: 0,
    };
    let problem = ProblemSpec::random(point.shape()?, &point.codebook_sizes()?, cli.seed)?;
    let mut spec = SearchSpec::new(problem);
    spec.budget = a.budget;
    spec.num_searches = a.searches;
    if let Some(n) = cli.trials {
        spec.trials_per_eval = n;
    }
    let result = if a.grid {
        grid_search(&spec, &a.grid_t, &a.grid_a, cli.seed)?
    } else {
        bayesian_search(&spec, cli.seed)?
    };
    println!("best_t={}", result.best_t);
    println!("best_a={}", result.best_a);
    println!("error_rate_at_nprime={:.6}", result.error_rate_at_nprime);
    println!("error_rate_at_n={:.6}", result.error_rate_at_n);
    if out.is_some() {
        emit(out, &result.to_csv())?;
    }
    Ok(())
}

fn classify_bench(cli: &Cli, a: &ClassifyBenchArgs, out: Option<&Path>) -> Result<()> {
    let map = ProductSpaceMap::random(shape(&a.shape)?, a.classes, a.factors, cli.seed)?;
    let config = ClassifierConfig::default();
    let queries = cli.trials.unwrap_or(2000);
    let mut text = String::from("sigma,queries,brute_force_accuracy,bcf_accuracy,gap\n");
    for (k, &sigma) in a.sigmas.iter().enumerate() {
        let spec = NoisyQuerySpec {
            noise_sigma: sigma,
            inverse_temperature: a.s_f,
        };
        let base = seed::derive(cli.seed, k as u64);
        let (mut bf, mut bcf) = (0usize, 0usize);
        for i in 0..queries {
            let class = i % a.classes;
            let q = make_noisy_query(&map, class, &spec, seed::derive(base, i as u64))?;
            bf += (classify(&map, &q, ClassifyMethod::BruteForce, &config)? == class) as usize;
            bcf += (classify(&map, &q, ClassifyMethod::Bcf, &config)? == class) as usize;
        }
        let (bf, bcf) = (bf as f64 / queries as f64, bcf as f64 / queries as f64);
        writeln!(text, "{sigma},{queries},{bf:.6},{bcf:.6},{:.6}", bf - bcf)?;
    }
    emit(out, &text)
}
