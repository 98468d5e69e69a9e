use thiserror::Error;

/// Errors produced by the screening toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky pivot `pivot` (1-based) was not strictly positive.
    #[error("decomposition failure: matrix is not positive definite (pivot {pivot})")]
    DecompositionFailure { pivot: usize },

    /// Column with zero variance; `column` is 0-based.
    #[error("degenerate column {column}: zero variance")]
    DegenerateColumn { column: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("lasso did not converge after {sweeps} sweeps (KKT violation {kkt_violation:.3e})")]
    LassoNonConvergence {
        sweeps: usize,
        kkt_violation: f64,
        best: Vec<f64>,
    },

    #[error("neighborhood regression for node {node} failed: {source}")]
    NodeRegression {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("graphical lasso did not converge after {iterations} sweeps (dual gap {gap:.3e})")]
    GlassoNonConvergence { iterations: usize, gap: f64 },

    #[error("graphical lasso refused: p = {p} exceeds the size guard of {limit} (set the override to force)")]
    SizeGuard { p: usize, limit: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors raised by an iterative solver that ran out of sweeps.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::LassoNonConvergence { .. } | Error::GlassoNonConvergence { .. } => true,
            Error::NodeRegression { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
