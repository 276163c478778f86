//! Generalized sparse block codes (GSBCs) and the block code factorizer.
//!
//! The crate provides the block-code vector algebra ([`algebra`]), codebooks
//! ([`codebook`]), the iterative factorizer ([`factorizer`]), a noisy-query
//! classification pipeline ([`query`]), Bayesian hyperparameter search
//! ([`hyperopt`]) and the seeded experiment harness behind the `bcf` CLI
//! ([`experiment`]).

pub mod algebra;
pub mod codebook;
pub mod error;
pub mod experiment;
pub mod factorizer;
pub mod hyperopt;
pub mod query;
pub mod seed;
pub mod shape;
pub mod vector;

pub use algebra::{bind, bundle, bundle_binary, sim_dot, sim_linf, unbind, Similarity};
pub use codebook::{random_codebook, CodeVectors, Codebook};
pub use error::{Error, FormatError, Result};
pub use factorizer::{
    brute_force_factorize, default_max_iterations, expected_sampler_iterations, factorize,
    factorize_observed, factorize_sampler_mode, factorize_sampler_mode_with, init_estimates,
    EstimateFormat, FactorizerConfig, FactorizerResult, ProblemSpec, Schedule, SimilarityVector,
};
pub use shape::BlockShape;
pub use vector::{BinarySbc, BlockVector, Gsbc};
