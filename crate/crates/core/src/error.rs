//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by any stage of the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes incompatible with an operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Argument outside the mathematical domain of a function.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A statistic is undefined for the given data (e.g. zero variance with
    /// unequal means).
    #[error("degenerate input for {op}: {detail}")]
    Degenerate { op: &'static str, detail: String },

    /// Pooled covariance too ill-conditioned to invert.
    #[error(
        "singular pooled covariance (condition number {cond:.3e} exceeds {limit:.1e}); \
         consider reducing dimensionality before testing"
    )]
    SingularCovariance { cond: f64, limit: f64 },

    /// Source/strategy pairing not allowed.
    #[error("strategy {strategy} cannot draw from a {source_kind} source")]
    IncompatibleStrategy { strategy: &'static str, source_kind: &'static str },

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Training failure (e.g. divergent loss), with the iteration at fault.
    #[error("training failed at iteration {iteration}: {detail}")]
    Train { iteration: usize, detail: String },

    /// Non-finite gradient for a named parameter.
    #[error("non-finite gradient for parameter {name}")]
    NonFiniteGradient { name: String },

    /// Serialized file carries an unsupported format version.
    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u32, supported: &'static str },

    /// Malformed serialized document.
    #[error("parse error in {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    /// Unknown condition/tag label, with the known vocabulary.
    #[error("unknown label {label:?}; vocabulary: [{vocabulary}]")]
    UnknownLabel { label: String, vocabulary: String },

    /// NIfTI ingestion error.
    #[error(transparent)]
    Nifti(#[from] NiftiError),

    /// Tag-sidecar error.
    #[error("tag sidecar: {0}")]
    Sidecar(String),

    /// Too many Monte-Carlo trials errored at one grid point.
    #[error(
        "excluded {excluded} of {trials} trials at n={n} (budget {budget:.0}%); first error: {first}"
    )]
    ExclusionBudget { excluded: usize, trials: usize, n: usize, budget: f64, first: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Structured failures of the NIfTI-1 reader; one variant per malformation so
/// callers can tell them apart.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum NiftiError {
    #[error("not a single-file NIfTI-1 volume (magic {found:?}, expected \"n+1\\0\")")]
    BadMagic { found: [u8; 4] },

    #[error("declared header size {found} is not the NIfTI-1 value 348")]
    BadHeaderSize { found: i32 },

    #[error("unsupported datatype code {code} (supported: 2=uint8, 4=int16, 16=float32)")]
    UnsupportedDatatype { code: i16 },

    #[error("dimension count {count} exceeds 4")]
    TooManyDims { count: i16 },

    #[error("dimension count {count} is below the 3 spatial dims required")]
    TooFewDims { count: i16 },

    #[error("non-positive or oversized dim entry {value} at index {index}")]
    BadDim { index: usize, value: i16 },

    #[error("4th dimension has size {size}; only a trailing singleton is accepted")]
    NonSingletonFourthDim { size: i16 },

    #[error("voxel offset {offset} precedes the 348-byte header")]
    BadVoxOffset { offset: i64 },

    #[error("file truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
}
