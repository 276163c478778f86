//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use bcf_core::experiment::{run_sweep, DecodeMode, ExperimentPlan, PointSpec};
use bcf_core::hyperopt::{bayesian_search, SearchSpec};
use bcf_core::query::{
    blockwise_cel, classify, make_noisy_query, ClassifierConfig, ClassifyMethod, NoisyQuerySpec,
    ProductSpaceMap,
};
use bcf_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn point(size: u128, d_p: usize, t: f64, a: usize) -> PointSpec {
    PointSpec {
        size,
        d_p,
        b: 4,
        f: 2,
        t,
        a,
    }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let e = start.elapsed();
    (
        e < limit,
        format!("{:.1}s (limit {}s)", e.as_secs_f64(), limit.as_secs()),
    )
}

/// Naive circular convolution per block, written out independently.
fn naive_bind(x: &[f64], y: &[f64], b: usize, l: usize) -> Vec<f64> {
    let mut out = vec![0.0; b * l];
    for blk in 0..b {
        for k in 0..l {
            let mut acc = 0.0;
            for j in 0..l {
                acc += x[blk * l + j] * y[blk * l + (k + l - j) % l];
            }
            out[blk * l + k] = acc;
        }
    }
    out
}

fn one_hot(offsets: &[u32], l: usize) -> Vec<f64> {
    let mut v = vec![0.0; offsets.len() * l];
    for (b, &o) in offsets.iter().enumerate() {
        v[b * l + o as usize] = 1.0;
    }
    v
}

fn all_codes(b: usize, l: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..b {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..l as u32).map(move |o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut failures = 0usize;
    let mut checked = 0usize;
    let mut check = |shape: BlockShape, xo: &[u32], yo: &[u32]| {
        let l = shape.block_len();
        let x = BinarySbc::new(shape, xo.to_vec()).unwrap();
        let y = BinarySbc::new(shape, yo.to_vec()).unwrap();
        let p = x.bind(&y).unwrap();
        let dense_p = bind(&x.to_gsbc(), &y.to_gsbc()).unwrap();
        let oracle = naive_bind(&one_hot(xo, l), &one_hot(yo, l), shape.blocks(), l);
        let ok = p.unbind(&y).unwrap() == x
            && dense_p == p.to_gsbc()
            && dense_p.values() == oracle.as_slice()
            && unbind(&dense_p, &y.to_gsbc()).unwrap() == x.to_gsbc();
        checked += 1;
        failures += !ok as usize;
    };
    for b in 2..=3 {
        for l in 4..=5 {
            let shape = BlockShape::new(b, l).unwrap();
            let codes = all_codes(b, l);
            for xo in &codes {
                for yo in &codes {
                    check(shape, xo, yo);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let b = rng.random_range(2..=16);
        let l = rng.random_range(16..=256);
        let shape = BlockShape::new(b, l).unwrap();
        let xo: Vec<u32> = (0..b).map(|_| rng.random_range(0..l as u32)).collect();
        let yo: Vec<u32> = (0..b).map(|_| rng.random_range(0..l as u32)).collect();
        check(shape, &xo, &yo);
    }
    let (fast, time) = within(Duration::from_secs(10), start);
    Outcome {
        pass: failures == 0 && fast,
        detail: format!("{failures} failures in {checked} cases, {time}"),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let plan = ExperimentPlan::new(vec![point(10_000, 512, 0.0, 0)], 500, 2);
    let t = run_sweep(&plan).unwrap().rows[0].tally;
    let (fast, time) = within(Duration::from_secs(30), start);
    Outcome {
        pass: t.accuracy() >= 0.98 && t.mean_iterations() <= 3.0 && fast,
        detail: format!(
            "accuracy {:.4}, mean iterations {:.3}, {time}",
            t.accuracy(),
            t.mean_iterations()
        ),
    }
}

fn criterion_3() -> Outcome {
    let run = |sim: Similarity| {
        let mut plan = ExperimentPlan::new(vec![point(40_000, 512, 0.0, 0)], 300, 3);
        plan.factorizer = plan.factorizer.with_similarity(sim);
        run_sweep(&plan).unwrap().rows[0].tally.accuracy()
    };
    let (linf, dot) = (run(Similarity::Linf), run(Similarity::Dot));
    Outcome {
        pass: linf >= 0.99 && dot < 0.99,
        detail: format!("linf accuracy {linf:.4}, dot accuracy {dot:.4}"),
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let plan = ExperimentPlan::new(vec![point(1_000_000, 1024, 0.00641, 100)], 200, 4);
    let t = run_sweep(&plan).unwrap().rows[0].tally;
    let (fast, time) = within(Duration::from_secs(15 * 60), start);
    Outcome {
        pass: t.accuracy() >= 0.98 && t.mean_iterations() <= 20.0 && fast,
        detail: format!(
            "T=0.00641 A=100: accuracy {:.4}, mean iterations {:.2}, {time}",
            t.accuracy(),
            t.mean_iterations()
        ),
    }
}

fn criterion_5() -> Outcome {
    let plan = ExperimentPlan::new(
        vec![
            point(1_000_000, 512, 0.00641, 100),
            point(1_000_000, 512, 0.00441, 1000),
        ],
        500,
        5,
    );
    let rows = run_sweep(&plan).unwrap().rows;
    let (sweet, wide) = (rows[0].tally, rows[1].tally);
    Outcome {
        pass: sweet.accuracy() >= 0.98 && sweet.mean_iterations() <= 22.0 && wide.accuracy() < 0.70,
        detail: format!(
            "A=100: accuracy {:.4}, mean iterations {:.2}; A=1000: accuracy {:.4}",
            sweet.accuracy(),
            sweet.mean_iterations(),
            wide.accuracy()
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [5usize, 10, 20] {
        let plan = ExperimentPlan::new(vec![point(1_000_000, 1024, 0.0, a)], 300, 6)
            .with_mode(DecodeMode::Sampler);
        let t = run_sweep(&plan).unwrap().rows[0].tally;
        let expected = 1000.0 / (2.0 * a as f64);
        let ok = (t.mean_iterations() - expected).abs() <= 0.2 * expected && t.accuracy() >= 0.99;
        pass &= ok;
        parts.push(format!(
            "A={a}: mean {:.1} vs {expected:.1}, accuracy {:.4}",
            t.mean_iterations(),
            t.accuracy()
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn criterion_7() -> Outcome {
    let got = [
        default_max_iterations(&[1000, 1000]),
        default_max_iterations(&[32, 32]),
        default_max_iterations(&[10, 10, 10]),
    ];
    Outcome {
        pass: got == [500, 16, 33],
        detail: format!("{got:?}"),
    }
}

/// Independent loss: mean over blocks of log-sum-exp minus the target logit.
fn naive_cel(q: &[f64], target: &[u32], s: f64, l: usize) -> f64 {
    let b = target.len();
    (0..b)
        .map(|blk| {
            let z: f64 = (0..l).map(|i| (s * q[blk * l + i]).exp()).sum();
            z.ln() - s * q[blk * l + target[blk] as usize]
        })
        .sum::<f64>()
        / b as f64
}

fn criterion_8() -> Outcome {
    let (b, l, h) = (4usize, 8usize, 1e-5);
    let shape = BlockShape::new(b, l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut loss_mismatch = 0.0f64;
    for _ in 0..100 {
        let q: Vec<f64> = (0..b * l).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = BinarySbc::random(shape, &mut rng);
        let s = rng.random_range(0.5..3.0);
        let g = blockwise_cel(&q, &target, s).unwrap();
        let t = target.offsets();
        loss_mismatch = loss_mismatch.max((g.loss - naive_cel(&q, t, s, l)).abs());

        let mut fd = Vec::with_capacity(b * l + 1);
        for i in 0..b * l {
            let (mut up, mut down) = (q.clone(), q.clone());
            up[i] += h;
            down[i] -= h;
            fd.push((naive_cel(&up, t, s, l) - naive_cel(&down, t, s, l)) / (2.0 * h));
        }
        fd.push((naive_cel(&q, t, s + h, l) - naive_cel(&q, t, s - h, l)) / (2.0 * h));
        let analytic: Vec<f64> = g.grad_q.iter().copied().chain([g.grad_s]).collect();
        let diff = fd
            .iter()
            .zip(&analytic)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = analytic
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(1e-12);
        worst = worst.max(diff / norm);
    }
    Outcome {
        pass: worst < 1e-4 && loss_mismatch < 1e-10,
        detail: format!("max relative error {worst:.2e}, max loss mismatch {loss_mismatch:.1e}"),
    }
}

fn criterion_9() -> Outcome {
    let shape = BlockShape::new(4, 128).unwrap();
    let map = ProductSpaceMap::random(shape, 100, 2, 9).unwrap();
    let spec = NoisyQuerySpec {
        noise_sigma: 0.3,
        inverse_temperature: 1.5,
    };
    let config = ClassifierConfig::default();
    let n = 2000;
    let (mut bf, mut bcf) = (0usize, 0usize);
    for i in 0..n {
        let class = i % 100;
        let q = make_noisy_query(&map, class, &spec, seed::derive(9, i as u64)).unwrap();
        bf += (classify(&map, &q, ClassifyMethod::BruteForce, &config).unwrap() == class) as usize;
        bcf += (classify(&map, &q, ClassifyMethod::Bcf, &config).unwrap() == class) as usize;
    }
    let (bf, bcf) = (bf as f64 / n as f64, bcf as f64 / n as f64);
    Outcome {
        pass: (bcf - bf).abs() <= 0.01,
        detail: format!(
            "brute force {bf:.4}, bcf {bcf:.4}, gap {:.4}",
            (bcf - bf).abs()
        ),
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_10() -> Outcome {
    let sweep = || {
        let mut plan = ExperimentPlan::new(
            vec![point(10_000, 512, 0.0, 0), point(90_000, 512, 0.005, 20)],
            60,
            10,
        );
        plan.factorizer = plan.factorizer.with_max_iterations(40);
        run_sweep(&plan).unwrap().to_csv(false)
    };
    let sweeps_equal = {
        let serial = in_pool(1, sweep);
        serial == in_pool(4, sweep) && serial == in_pool(1, sweep)
    };

    let search = || {
        let problem = ProblemSpec::random(BlockShape::new(4, 128).unwrap(), &[60, 60], 10).unwrap();
        let mut spec = SearchSpec::new(problem);
        spec.budget = 12;
        spec.num_searches = 2;
        spec.trials_per_eval = 24;
        spec.candidates = 256;
        bayesian_search(&spec, 10).unwrap().to_csv()
    };
    let searches_equal = in_pool(1, search) == in_pool(4, search);

    let problem = ProblemSpec::random(BlockShape::new(4, 128).unwrap(), &[400, 400], 11).unwrap();
    let q = problem.product(&[3, 399]).unwrap();
    let config = FactorizerConfig::default()
        .with_threshold(0.006)
        .with_sampling_width(40)
        .with_seed(5);
    let factorize_equal = format!("{:?}", factorize(&problem, &q, &config).unwrap())
        == format!("{:?}", factorize(&problem, &q, &config).unwrap());

    Outcome {
        pass: sweeps_equal && searches_equal && factorize_equal,
        detail: format!(
            "sweep {sweeps_equal}, search {searches_equal}, factorize {factorize_equal}"
        ),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("algebra exactness", criterion_1),
        ("fast-convergence regime", criterion_2),
        ("similarity-metric separation", criterion_3),
        ("F=2 at D=1024, size 1e6", criterion_4),
        ("sampling-width sweet spot", criterion_5),
        ("sampler analytics", criterion_6),
        ("default iteration cap", criterion_7),
        ("gradient oracle", criterion_8),
        ("classification parity", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        println!(
            "criterion {:>2} {:<30} {} ({}; {:.1}s)",
            i + 1,
            name,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
        failed += !out.pass as usize;
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
