use std::io;

use thiserror::Error;

/// Errors produced by the loss, metric and dataset routines.
#[derive(Debug, Error)]
pub enum MixkitError {
    #[error("undefined reference: the reference signal is all zeros")]
    UndefinedReference,
    #[error("degenerate mixture: the mixture signal is all zeros")]
    DegenerateMixture,
    #[error("empty signal")]
    EmptySignal,
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sample rate mismatch: expected {expected}, got {got}")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("exhaustive search infeasible: {n}^{m} assignments exceeds cap {cap}")]
    ExhaustiveInfeasible { n: usize, m: usize, cap: u64 },
    #[error("needs at least {needed} sources, got {got}")]
    TooFewSources { needed: usize, got: usize },
    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid band specification: {0}")]
    InvalidBand(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not a single-source example ({active} active references)")]
    NotSingleSource { active: usize },
    #[error("no active references")]
    NoActiveReferences,
    #[error("optimizer diverged at step {step}")]
    Divergence { step: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: String },
    #[error("manifest hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, MixkitError>;
