use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("interfaces pinched off at t = {t} s (gap {gap:e} m)")]
    PinchOff { t: f64, gap: f64 },

    #[error("Picard iteration diverged: non-finite value in component {component} at node {node}")]
    Diverged { component: usize, node: usize },

    #[error("Picard iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iterate left the ball: |v| = {norm:e} > M = {bound:e}")]
    BallEscape { norm: f64, bound: f64 },

    #[error("contraction lost: residual ratio {ratio:.3} above guard {guard:.3} twice in a row")]
    ContractionLost { ratio: f64, guard: f64 },

    #[error("solver step budget of {0} steps exhausted")]
    StepBudget(usize),

    #[error("prolonged state violates hypotheses: {0}")]
    Prolongation(ValidationReport),

    #[error("finite-difference oracle unstable at t = {t} s")]
    Unstable { t: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in diagnostics output.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Domain(_) => "domain",
            Error::PinchOff { .. } => "pinch_off",
            Error::Diverged { .. } => "diverged",
            Error::NonConvergence { .. } => "non_convergence",
            Error::BallEscape { .. } => "ball_escape",
            Error::ContractionLost { .. } => "contraction_lost",
            Error::StepBudget(_) => "step_budget",
            Error::Prolongation(_) => "prolongation",
            Error::Unstable { .. } => "unstable",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {value}")))
    }
}
