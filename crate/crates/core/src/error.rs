use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "propagator bracket is non-positive at sample {index} (j = {j}, s = {s}); input outside the operating window"
    )]
    Domain { index: usize, j: f64, s: f64 },

    #[error("drive j = {j} is subcritical (alpha = {alpha} <= 0); no nonzero steady state")]
    Subcritical { j: f64, alpha: f64 },

    #[error("non-positive nonlinearity exponent n = {n} at j = {j}")]
    NonPositiveExponent { j: f64, n: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX file: needed {needed} bytes, have {available}")]
    TruncatedFile { needed: usize, available: usize },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("all targets are identical; NRMSE is undefined")]
    DegenerateTargets,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("calibration grid is empty")]
    EmptyGrid,

    #[error("calibration grid point (j_dc = {j_dc}, amplitude = {amplitude}, d_t = {d_t}) failed: {source}")]
    GridPoint {
        j_dc: f64,
        amplitude: f64,
        d_t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain { .. }
            | Error::Subcritical { .. }
            | Error::NonPositiveExponent { .. }
            | Error::DegenerateTargets
            | Error::NumericalFailure(_) => ErrorClass::Numerical,
            Error::InvalidConfig(_) | Error::EmptyGrid => ErrorClass::Usage,
            Error::GridPoint { source, .. } | Error::Context { source, .. } => source.class(),
            Error::DimensionMismatch { .. }
            | Error::DegenerateData(_)
            | Error::BadMagic { .. }
            | Error::TruncatedFile { .. }
            | Error::CountMismatch { .. }
            | Error::LabelOutOfRange { .. }
            | Error::EmptyClass(_)
            | Error::Serialization(_)
            | Error::Io(_) => ErrorClass::Data,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::NumericalFailure(e.to_string())
    }
}
