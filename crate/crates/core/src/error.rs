use thiserror::Error;

/// Which side of the CCA problem an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    X,
    Y,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::X => f.write_str("X"),
            Side::Y => f.write_str("Y"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CcaError {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("input is empty")]
    EmptyInput,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("covariate design is rank deficient (relative singular value {ratio:.3e})")]
    SingularDesign { ratio: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported penalty: {0}")]
    UnsupportedPenalty(String),
    #[error(
        "regularized covariance for {side} is not positive definite (min eigenvalue {min_eigenvalue:.3e}); increase the penalty"
    )]
    SingularCovariance { side: Side, min_eigenvalue: f64 },
    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),
    #[error("degenerate variate: {0}")]
    DegenerateVariate(String),
    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),
    #[error("unpenalized block is not identifiable: {0}; shrink the unpenalized set")]
    Identifiability(String),
    #[error("no grid point could be fitted: {0}")]
    NoFeasiblePoint(String),
    #[error("joint covariance is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    InvalidCovariance { min_eigenvalue: f64 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CcaError {
    /// True for failures caused by the numbers rather than by how the
    /// library was called.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CcaError::SingularDesign { .. }
                | CcaError::SingularCovariance { .. }
                | CcaError::DegenerateDirection(_)
                | CcaError::DegenerateVariate(_)
                | CcaError::NumericalConsistency(_)
                | CcaError::Identifiability(_)
                | CcaError::NoFeasiblePoint(_)
                | CcaError::InvalidCovariance { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, CcaError>;
