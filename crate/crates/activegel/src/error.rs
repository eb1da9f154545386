use thiserror::Error;

/// Error type shared by all solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate domain: R + rho(phi) <= 0 (min {min:.6e} at phi = {phi:.4})")]
    DegenerateDomain { min: f64, phi: f64 },

    #[error("nonphysical state: {0}")]
    Nonphysical(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("singular operator: {0}")]
    SingularOperator(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("iteration did not converge after {iters} steps (last residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("no sign change of {func} on bracket [{lo}, {hi}]")]
    NoSignChange { func: &'static str, lo: f64, hi: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("CFL violation: dt = {dt:.3e} exceeds stability bound {bound:.3e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("myosin positivity lost at t = {time:.6} (min m = {min:.3e})")]
    PositivityLoss { time: f64, min: f64 },

    #[error("insufficient decay: {0}")]
    InsufficientDecay(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
