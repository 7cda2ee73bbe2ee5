use thiserror::Error;

/// Errors raised by the geometry, regression, inference and I/O layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("iterate lost positive definiteness at iteration {iteration} (smallest eigenvalue {min_eigenvalue:e})")]
    IterateNotPositiveDefinite { iteration: usize, min_eigenvalue: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("covariate covariance is numerically singular (condition number {condition:e})")]
    SingularCovariance { condition: f64 },

    #[error("linear operator is singular on symmetric matrices (smallest eigenvalue {min_eigenvalue:e})")]
    SingularOperator { min_eigenvalue: f64 },

    #[error("fits did not converge for samples {indices:?} (barycenter converged: {barycenter_converged})")]
    NonConvergence {
        indices: Vec<usize>,
        barycenter_converged: bool,
    },

    #[error("example 2 requires an even matrix dimension, got {0}")]
    OddDimension(usize),

    #[error("surrogate covariance for sample {sample} is rank deficient (smallest eigenvalue {min_eigenvalue:e})")]
    RankDeficientSurrogate { sample: usize, min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("parse error in {file} at line {line}, column {column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("response {sample} is asymmetric at ({row}, {col})")]
    AsymmetricResponse { sample: usize, row: usize, col: usize },

    #[error("response {sample} is missing cell ({row}, {col})")]
    MissingCell { sample: usize, row: usize, col: usize },

    #[error("response {sample} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    ResponseNotPositiveDefinite { sample: usize, min_eigenvalue: f64 },

    #[error("{failed} of {trials} trials failed; first failure: {first}")]
    ExperimentFailed {
        failed: usize,
        trials: usize,
        first: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::IterateNotPositiveDefinite { .. } => "IterateNotPositiveDefinite",
            Error::NumericalBreakdown(_) => "NumericalBreakdown",
            Error::SingularCovariance { .. } => "SingularCovariance",
            Error::SingularOperator { .. } => "SingularOperator",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::OddDimension(_) => "OddDimension",
            Error::RankDeficientSurrogate { .. } => "RankDeficientSurrogate",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidDataset(_) => "InvalidDataset",
            Error::Parse { .. } => "ParseError",
            Error::AsymmetricResponse { .. } => "AsymmetricResponse",
            Error::MissingCell { .. } => "MissingCell",
            Error::ResponseNotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::ExperimentFailed { .. } => "ExperimentFailed",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
