//! Fixtures shared by the benchmarks.

use bcf_core::{BinarySbc, BlockShape, Gsbc, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn shape(d_p: usize, blocks: usize) -> BlockShape {
    BlockShape::from_dim(d_p, blocks).expect("valid benchmark shape")
}

/// Random GSBC with `nnz` nonzero entries per block.
pub fn dense(shape: BlockShape, nnz: usize, seed: u64) -> Gsbc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = shape.block_len();
    let mut values = vec![0.0; shape.dim()];
    for b in 0..shape.blocks() {
        let block = &mut values[b * l..(b + 1) * l];
        for _ in 0..nnz {
            block[rng.random_range(0..l)] += rng.random::<f64>() + 0.01;
        }
        let sum: f64 = block.iter().sum();
        block.iter_mut().for_each(|v| *v /= sum);
    }
    Gsbc::new(shape, values).expect("normalized blocks")
}

pub fn binary(shape: BlockShape, seed: u64) -> BinarySbc {
    BinarySbc::random(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Problem with `m` codevectors per factor and an exact query for `(1, 2, ...)`.
pub fn problem(shape: BlockShape, m: usize, factors: usize, seed: u64) -> (ProblemSpec, Gsbc) {
    let p = ProblemSpec::random(shape, &vec![m; factors], seed).expect("valid problem");
    let truth: Vec<usize> = (1..=factors).map(|i| i % m).collect();
    let q = p.product(&truth).expect("indices in range");
    (p, q)
}
