use thiserror::Error;

use crate::shape::BlockShape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: BlockShape, right: BlockShape },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("bundling weights must be nonnegative with a positive sum")]
    ZeroWeights,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("product space of size {size} exceeds the enumeration limit {limit}")]
    ProductSpaceTooLarge { size: u128, limit: u128 },

    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised while parsing the codebook text format.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("malformed codebook header: {0}")]
    MalformedHeader(String),

    #[error("line {line}: expected {expected} offsets, found {found}")]
    WrongOffsetCount {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: offset {offset} out of range for block length {l}")]
    OffsetOutOfRange { line: usize, offset: u64, l: usize },

    #[error("line {line}: invalid integer {token:?}")]
    BadInteger { line: usize, token: String },

    #[error("expected {expected} codevector lines, found {found}")]
    WrongLineCount { expected: usize, found: usize },
}
