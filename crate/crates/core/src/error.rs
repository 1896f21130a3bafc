use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("design is rank deficient: column `{column}` (index {index}) is collinear with earlier columns")]
    RankDeficient { column: String, index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),

    #[error("unknown term `{0}`")]
    UnknownTerm(String),

    #[error("no penalized terms supplied to the lasso")]
    EmptyPenaltySet,

    #[error("cross-validation fold {fold} leaves {rows} training rows, need at least {required}")]
    FoldTooSmall {
        fold: usize,
        rows: usize,
        required: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: column `{column}` not found in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: missing value in column `{column}`")]
    MissingValue {
        path: PathBuf,
        line: usize,
        column: String,
    },

    #[error("no subjects remain after filtering (min_cells = {min_cells})")]
    NoSubjectsRemain { min_cells: usize },

    #[error("no genes remain after filtering")]
    NoGenesRemain,

    #[error("exposure takes fewer than two distinct values")]
    DegenerateExposure,

    #[error("{n} subjects available, at least {required} required")]
    TooFewSubjects { n: usize, required: usize },

    #[error("gene `{gene}`: {source}")]
    Gene {
        gene: String,
        #[source]
        source: Box<Error>,
    },

    #[error("key mismatch: {0}")]
    KeyMismatch(String),

    #[error("{what} = {value} is outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Errors caused by bad inputs or settings, as opposed to failures while
    /// writing results.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Output { .. } => false,
            Error::Gene { source, .. } | Error::Replicate { source, .. } => source.is_validation(),
            _ => true,
        }
    }

    pub(crate) fn for_gene(self, gene: &str) -> Error {
        Error::Gene {
            gene: gene.to_string(),
            source: Box::new(self),
        }
    }
}
