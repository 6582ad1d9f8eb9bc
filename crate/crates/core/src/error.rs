use thiserror::Error;

/// Errors raised anywhere in the approximation pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("objective returned a non-finite value at x = {x:?}")]
    NonFiniteObjective { x: Vec<f64> },

    #[error("evaluation budget of {max_evals} exhausted")]
    BudgetExceeded { max_evals: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("minimizer did not converge after {iterations} iterations (|grad|_inf = {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("Hessian block is not positive definite at x = {x:?}")]
    HessianNotPd { x: Vec<f64> },

    #[error("profile does not decay on the {side} side of {center} (last probe {last_probe})")]
    UnboundedProfile {
        side: &'static str,
        center: f64,
        last_probe: f64,
    },

    #[error("quadrature tolerance not met after {panels} panels (error estimate {abs_err_est:e})")]
    ToleranceNotMet { panels: usize, abs_err_est: f64 },

    #[error("dimension {dim} is too large for this method (max {max})")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("coordinate {q}: {source}")]
    AtCoordinate {
        q: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Annotates an error with the (1-based) coordinate index it occurred at.
    pub fn at_coordinate(self, q: usize) -> Self {
        Error::AtCoordinate {
            q,
            source: Box::new(self),
        }
    }

    /// The underlying error, with coordinate annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtCoordinate { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
