use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),

    #[error("variable `{variable}`: duplicate state label `{state}`")]
    DuplicateState { variable: String, state: String },

    #[error("variable `{variable}` has {states} state(s); at least 2 are required")]
    TooFewStates { variable: String, states: usize },

    #[error("variable `{0}`: uninferable cardinality (no observed values and no schema)")]
    UninferableCardinality(String),

    #[error("variable `{variable}`: value `{value}` is not a declared state")]
    UnknownState { variable: String, value: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("row {row} has {found} entries, expected {expected}")]
    RowLength {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("row {row}, variable {variable}: state index {index} out of range")]
    StateOutOfRange {
        row: usize,
        variable: usize,
        index: usize,
    },

    #[error("invalid parent context: {0}")]
    InvalidContext(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid completion distribution: {0}")]
    InvalidPhi(String),

    #[error("exact score requires complete family data")]
    IncompleteFamily,

    #[error("model is not a DAG: {0}")]
    NotADag(String),

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("{what} exceeds cap: {count} > {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("invalid CPT for `{variable}`: {reason}")]
    InvalidCpt { variable: String, reason: String },

    #[error("unknown built-in spec `{0}` (expected one of M1, M2, M3, M4)")]
    UnknownSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for internal invariant violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            _ => 1,
        }
    }
}
