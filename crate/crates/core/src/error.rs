use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("schema violation in {file}{}: field `{field}`: {message}", row_suffix(*.row))]
    SchemaViolation {
        file: String,
        row: Option<usize>,
        field: String,
        message: String,
    },

    #[error("range violation: {context} = {value} is outside {range}")]
    RangeViolation {
        context: String,
        value: f64,
        range: &'static str,
    },

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("too few subjects: {subjects} subjects cannot fill {k} folds")]
    TooFewSubjects { subjects: usize, k: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("value {0} is outside the domain (-1, 1)")]
    OutOfDomain(f64),

    #[error("reference contains a single class")]
    SingleClassReference,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("no valid annotator pairs for {0}")]
    NoValidPairs(String),

    #[error("no traces overlap in time")]
    EmptyOverlap,

    #[error("missing statistics for label `{0}`")]
    MissingLabelStats(String),

    #[error("non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("{0}")]
    ProvenanceViolation(String),

    #[error("design matrix is rank deficient ({rank} of {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    #[error("factor `{factor}` has no observations at level `{level}`")]
    MissingLevel { factor: String, level: String },

    #[error("sampler did not converge: max R-hat {max_rhat:.4} on `{quantity}`")]
    NonConvergence { max_rhat: f64, quantity: String },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

fn row_suffix(row: Option<usize>) -> String {
    match row {
        Some(r) => format!(" (row {r})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn schema(
        file: impl Into<String>,
        row: Option<usize>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::SchemaViolation {
            file: file.into(),
            row,
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
