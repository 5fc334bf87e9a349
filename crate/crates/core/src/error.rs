use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected")]
    Disconnected,

    #[error("graph is not simple: {0}")]
    NonSimple(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("augmented matrix of side {0} exceeds the dense oracle limit")]
    TooLarge(usize),

    #[error(
        "root finder did not converge for lambda={lambda}, tau={tau} \
         (worst relative residual {residual:e})"
    )]
    RootFinder {
        lambda: f64,
        tau: usize,
        residual: f64,
    },

    #[error(
        "gain optimizer failed after {iterations} iterations \
         (best iterate: lambda2={lambda2:e}, lambdaN={lambda_n:e})"
    )]
    Optimizer {
        iterations: usize,
        lambda2: f64,
        lambda_n: f64,
        best_weights: Vec<f64>,
    },

    #[error("eigensolver did not converge: {0}")]
    Eigensolver(String),

    #[error("insufficient signal for rate estimation: {0}")]
    InsufficientSignal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RootFinder { .. }
                | Error::Eigensolver(_)
                | Error::Optimizer { .. }
                | Error::InsufficientSignal(_)
        )
    }
}
