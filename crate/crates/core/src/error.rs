use alloc::string::String;

/// Errors raised by the core data model, kernels, classifiers and metrics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("label {label} at row {row} is out of range for {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("invalid class names: {0}")]
    InvalidClassNames(String),
    #[error("{0} must be L2-normalized")]
    NotNormalized(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: String,
    },
    #[error("duplicate row index {0} in shot selection")]
    DuplicateIndex(usize),
    #[error("row index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("class {class} has {found} shots, expected {expected}")]
    UnequalShots {
        class: usize,
        found: usize,
        expected: usize,
    },
    #[error("class {class} has {available} items, fewer than the {requested} requested")]
    InsufficientItems {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("constant input: {0}")]
    ConstantInput(&'static str),
    #[error("no same-class pair exists")]
    NoPairs,
    #[error("class name {0:?} cannot be mapped onto the source vocabulary")]
    UnmappableClass(String),
    #[error("method {0} requires adapted embeddings")]
    MissingAdapted(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
