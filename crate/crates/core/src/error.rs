use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset failed validation ({} violation(s)); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("complete or quasi-complete separation in logistic fit ({0})")]
    Separation(String),

    #[error("design matrix is rank deficient ({0})")]
    SingularDesign(String),

    #[error(
        "model has not converged after {iterations} iterations (max |score| = {max_grad_norm:e})"
    )]
    NotConverged {
        iterations: usize,
        max_grad_norm: f64,
    },

    #[error("no events available to fit `{0}`")]
    NoEvents(String),

    #[error("non-finite likelihood while fitting `{0}`")]
    Numerical(String),

    #[error("covariate `{field}` is not available for subject {id}")]
    MissingField { field: String, id: i64 },

    #[error("positivity violated for subject {id}: {what} evaluates to zero")]
    Positivity { id: i64, what: String },

    #[error("no subjects consistent with the target regime ({0})")]
    NoConsistentSubjects(String),

    #[error("bootstrap degenerate: {failed} of {requested} replicates failed")]
    BootstrapDegenerate { failed: usize, requested: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI's structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Separation(_) => "separation",
            Error::SingularDesign(_) => "singular_design",
            Error::NotConverged { .. } => "not_converged",
            Error::NoEvents(_) => "no_events",
            Error::Numerical(_) => "numerical",
            Error::MissingField { .. } => "missing_field",
            Error::Positivity { .. } => "positivity",
            Error::NoConsistentSubjects(_) => "no_consistent_subjects",
            Error::BootstrapDegenerate { .. } => "bootstrap_degenerate",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
