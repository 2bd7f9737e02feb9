use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("energy evaluation is not finite at t = {t}, x = {x:?}")]
    Evaluation { t: f64, x: Vec<f64> },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid model parameters: {0}")]
    Construction(String),

    #[error("symmetric eigen-decomposition failed at t = {t}")]
    Spectral { t: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("implicit solve failed at t = {t}: step size fell below the minimum")]
    StiffFailure { t: f64, last_state: Vec<f64> },

    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("step limit of {limit} reached at t = {t}")]
    StepLimit { t: f64, limit: usize },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no convergence: {reason}")]
    NonConvergence { reason: String, state: Vec<f64> },

    #[error("ambiguous nearest critical point at t = {t}")]
    Ambiguous { t: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("bound inapplicable, hypothesis failed: {0}")]
    BoundInapplicable(String),

    #[error("no successful estimates to report on")]
    EmptyReport,

    #[error("invalid options: {0}")]
    Options(String),
}

pub type Result<T> = std::result::Result<T, Error>;
