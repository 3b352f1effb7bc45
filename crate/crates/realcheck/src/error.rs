//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("sample covariance is degenerate (singular even after jitter escalation)")]
    DegenerateSample,

    #[error("empty sample")]
    EmptySample,

    #[error("eigensolver failed to converge within the sweep cap")]
    ConvergenceFailure,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("records carry mixed dimensions: {first} vs {other}")]
    MixedDimensions { first: usize, other: usize },

    #[error("every record was skipped as degenerate")]
    AllRecordsDegenerate,

    #[error("record {index} carries no raw samples")]
    NoRawSamples { index: usize },

    #[error("value set has zero variance")]
    ZeroVariance,

    #[error("too few usable records: need at least {need}, got {got}")]
    TooFewRecords { need: usize, got: usize },

    #[error("invalid classification record: {0}")]
    InvalidRecord(String),

    #[error(
        "score '{score}' needs at least two samples per record ({affected} record(s) have one)"
    )]
    NeedsSamples { score: String, affected: usize },

    #[error("curve undefined: all records belong to one class")]
    OneClassOnly,

    #[error("precision-recall curve undefined: no positive records")]
    NoPositives,

    #[error("curve is degenerate (fewer than two points)")]
    DegenerateCurve,

    #[error("invalid simulation regime: {0}")]
    InvalidRegime(String),

    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },

    #[error("invalid probability row at line {line}: sum {sum} outside tolerance")]
    InvalidProbability { line: usize, sum: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
