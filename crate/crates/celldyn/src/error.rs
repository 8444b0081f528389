//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Error`]. Variants carry
//! enough context (sample indices, offending values, column names) for a
//! caller to report the failure without re-deriving it.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by cell bookkeeping, models, identification, estimation,
/// and the synthetic plant.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter struct failed validation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A trace was empty where at least one sample is required.
    #[error("trace is empty")]
    EmptyTrace,

    /// Sample timestamps are not uniformly spaced within tolerance.
    #[error("non-uniform sampling at index {index}: step {actual_s} s, expected {expected_s} s")]
    NonUniformSampling {
        index: usize,
        actual_s: f64,
        expected_s: f64,
    },

    /// The trace sampling period disagrees with the configured cell sampling
    /// period.
    #[error("trace sample period {trace_s} s does not match configured period {cell_s} s")]
    SamplePeriodMismatch { trace_s: f64, cell_s: f64 },

    /// A model output could not be evaluated at the given operating point.
    #[error("domain error at sample {index}: {reason}")]
    Domain { index: usize, reason: String },

    /// A state-of-charge argument fell outside the open interval (0, 1)
    /// required by the requested output function.
    #[error("soc {value} outside (0, 1) in {op}")]
    SocOutOfRange { value: f64, op: &'static str },

    /// Every candidate row of a regressor was excluded.
    #[error("regressor is empty: {total} rows considered, {excluded} excluded")]
    EmptyRegressor { total: usize, excluded: usize },

    /// The least-squares design matrix lost column rank.
    #[error("design matrix rank {rank} of {cols}; deficient columns: {columns:?}")]
    RankDeficient {
        rank: usize,
        cols: usize,
        columns: Vec<&'static str>,
    },

    /// A covariance diagonal exceeded the blow-up guard.
    #[error("covariance blew up at sample {index}: max diagonal {max_diag:e} exceeds {limit:e}")]
    CovarianceBlowup {
        index: usize,
        max_diag: f64,
        limit: f64,
    },

    /// A current-magnitude schedule bin received no samples.
    #[error("schedule bin {bin} ({lo_a}..{hi_a} A) has no samples")]
    EmptyBin { bin: usize, lo_a: f64, hi_a: f64 },

    /// An operation was asked to run with a model family it does not support.
    #[error("model family {family} not supported by {op}")]
    FamilyMismatch { family: &'static str, op: &'static str },

    /// Vector or matrix dimensions disagreed.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A requested synthetic profile cannot be realized.
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),

    /// A text file (CSV, config, parameter file) could not be parsed.
    #[error("parse error in {path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
