use thiserror::Error;

use crate::model::ChannelLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate state: norm is zero")]
    DegenerateState,
    #[error("density matrix has zero trace")]
    ZeroTrace,
    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("step size {dt} violates the stability guard ({detail})")]
    StabilityGuard { dt: f64, detail: String },
    #[error("detuned long-time limit undefined (delta_omega = {delta_omega})")]
    DetunedLimit { delta_omega: f64 },
    #[error("no jump possible: all channel weights vanish")]
    NoJumpPossible,
    #[error("jump {0:?} annihilates the state")]
    AnnihilatedState(ChannelLabel),
    #[error("steady state not reached within {steps} steps (residual {residual:e})")]
    NotConverged { steps: usize, residual: f64 },
    #[error("collective heat current requires omega1 == omega2 (got {omega1}, {omega2})")]
    DetunedCollectiveCurrent { omega1: f64, omega2: f64 },
    #[error("fully decayed at t = {t}; postselection undefined")]
    FullyDecayed { t: f64 },
    #[error("postselection precondition violated: {0}")]
    PostselectionDomain(String),
    #[error("insufficient statistics: no surviving trajectory at t = {t}")]
    InsufficientStatistics { t: f64 },
    #[error("sample grids of the records do not match")]
    GridMismatch,
    #[error("time {t} is not on the sample grid")]
    NotOnGrid { t: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("trace drift {drift:e} exceeds tolerance {tol:e}")]
    TraceDrift { drift: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
