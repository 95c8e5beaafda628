use thiserror::Error;

/// Residuals carried by a non-converged solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LastResiduals {
    pub gap_per_volume: f64,
    pub primal_value: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape exceeds grid bounds: {0}")]
    Bounds(String),
    #[error("grid spec error: {0}")]
    Spec(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("solver did not converge after {} iterations (gap per unit volume {:.3e})", .0.iterations, .0.gap_per_volume)]
    Convergence(LastResiduals),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),
    #[error("invalid perturbation family: {0}")]
    Family(String),
    #[error("fixed-point inversion diverged at {0:?}")]
    Inversion(Vec<f64>),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
