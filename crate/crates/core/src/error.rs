use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("regime assumption fails: mean offspring m = {m} is not > 1")]
    NotSupercritical { m: f64 },

    #[error("Malthusian bracket not found within {0} doublings")]
    BracketNotFound(usize),

    #[error("quadrature produced a non-finite value ({0})")]
    NonFinite(&'static str),

    #[error("time {t} is beyond the solver horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("corrector did not converge at t = {t} (relative change {change:e})")]
    CorrectorDiverged { t: f64, change: f64 },

    #[error("phi residual {residual:e} at theta = {theta} exceeds 1e-2; increase the horizon T")]
    PhiResidual { theta: f64, residual: f64 },

    #[error("second moment needs a bounded g''(., 1-), got sup = {0}")]
    UnboundedSecondFactorial(f64),

    #[error("verification: {0}")]
    Verify(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
