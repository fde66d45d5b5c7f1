use thiserror::Error;

use crate::numerics::QuadratureResult;

/// A single violated field in a model or run configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("quadrature did not converge (best estimate {:.6e}, error {:.3e})", .best.value, .best.abs_error_estimate)]
    QuadratureNonConvergence { best: QuadratureResult },

    #[error("invalid model specification: {}", join_fields(.0))]
    InvalidSpec(Vec<FieldError>),

    #[error("invalid configuration: {}", join_fields(.0))]
    InvalidConfig(Vec<FieldError>),

    #[error("estimator {estimator} failed at replication {replication} (seed {seed}): {source}")]
    Replication {
        estimator: String,
        replication: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

fn join_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
