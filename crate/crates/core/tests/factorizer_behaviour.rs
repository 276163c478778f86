use bcf_core::experiment::{
    find_capacity, run_sweep, similarity_histogram, DecodeMode, ExperimentPlan, PointSpec,
};
use bcf_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(size: u128) -> PointSpec {
    PointSpec {
        size,
        d_p: 512,
        b: 4,
        f: 2,
        t: 0.0,
        a: 0,
    }
}

fn shape() -> BlockShape {
    BlockShape::new(4, 128).unwrap()
}

#[test]
fn small_problems_converge_in_about_two_iterations() {
    let report = run_sweep(&ExperimentPlan::new(
        vec![point(1000), point(10_000)],
        200,
        1,
    ))
    .unwrap();
    for row in &report.rows {
        assert!(row.tally.accuracy() >= 0.99, "{:?}", row);
        assert!(row.tally.mean_iterations() <= 3.0, "{:?}", row);
    }
}

#[test]
fn brute_force_agrees_on_converged_trials() {
    let problem = ProblemSpec::random(shape(), &[100, 100], 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let truth = vec![rng.random_range(0..100), rng.random_range(0..100)];
        let q = problem.product(&truth).unwrap();
        let bcf = factorize(&problem, &q, &FactorizerConfig::default()).unwrap();
        let bf = brute_force_factorize(&problem, &q, Similarity::Linf).unwrap();
        assert_eq!(bf.indices, truth);
        if bcf.converged {
            assert_eq!(bcf.indices, bf.indices);
        }
    }
}

#[test]
fn convergence_is_sound_under_linf() {
    let problem = ProblemSpec::random(shape(), &[150, 150], 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let config = FactorizerConfig::default()
        .with_threshold(0.01)
        .with_sampling_width(5);
    for i in 0..40 {
        let truth = vec![rng.random_range(0..150), rng.random_range(0..150)];
        let q = problem.product(&truth).unwrap();
        let r = factorize(&problem, &q, &config.clone().with_seed(i)).unwrap();
        assert!(r.iterations <= default_max_iterations(&[150, 150]));
        assert_eq!(r.similarity_searches, r.iterations as u64 * 300);
        if r.converged {
            let rebound = problem.product(&r.indices).unwrap();
            assert!(sim_linf(&rebound, &q).unwrap() >= config.detection_threshold);
        }
    }
}

#[test]
fn three_factors() {
    let problem = ProblemSpec::random(shape(), &[10, 10, 10], 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let truth: Vec<usize> = (0..3).map(|_| rng.random_range(0..10)).collect();
        let r = factorize(
            &problem,
            &problem.product(&truth).unwrap(),
            &FactorizerConfig::default(),
        )
        .unwrap();
        assert_eq!(r.indices, truth);
        assert!(r.converged);
    }
}

#[test]
fn random_sampling_is_seeded() {
    let problem = ProblemSpec::random(shape(), &[300, 300], 4).unwrap();
    let q = problem.product(&[17, 230]).unwrap();
    let config = FactorizerConfig::default()
        .with_threshold(0.006)
        .with_sampling_width(30)
        .with_seed(99);
    assert_eq!(
        factorize(&problem, &q, &config).unwrap(),
        factorize(&problem, &q, &config).unwrap()
    );
    let a = factorize_sampler_mode(&problem, &q, 20, 1).unwrap();
    assert_eq!(a, factorize_sampler_mode(&problem, &q, 20, 1).unwrap());
}

#[test]
fn sampler_mode_tracks_expectation() {
    let mut plan = ExperimentPlan::new(
        vec![PointSpec {
            a: 5,
            ..point(40_000)
        }],
        200,
        6,
    );
    plan.mode = DecodeMode::Sampler;
    let row = &run_sweep(&plan).unwrap().rows[0];
    let expected = expected_sampler_iterations(&[200, 200], 5);
    assert_eq!(expected, 20.0);
    let mean = row.tally.mean_iterations();
    assert!((mean - expected).abs() <= 0.3 * expected, "mean {mean}");
    assert!(row.tally.accuracy() >= 0.97);
}

#[test]
fn binary_estimates_with_dot_fail_small_sizes() {
    let mut plan = ExperimentPlan::new(vec![point(1000), point(10_000)], 100, 3);
    plan.factorizer = plan
        .factorizer
        .with_similarity(Similarity::Dot)
        .with_estimate_format(EstimateFormat::Binary);
    let cap = find_capacity(&plan, 0.99).unwrap();
    assert_eq!(cap.capacity, None);
    assert_eq!(cap.report.rows.len(), 1);
}

#[test]
fn histograms_at_size_four_times_ten_to_four() {
    let problem = ProblemSpec::random(shape(), &[200, 200], 0).unwrap();
    let h = similarity_histogram(&problem, 2, 20, 50, 0).unwrap();
    assert!(h.linf.zero_is_mode());
    assert!(h.linf.ones > 0);
    assert!(!h.dot.zero_is_mode());
    assert!(h.dot.total() > 0);
}
