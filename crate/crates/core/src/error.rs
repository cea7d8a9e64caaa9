use thiserror::Error;

/// Failure modes shared across the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("model `{model}` requires parameter `{param}`")]
    MissingParam { model: String, param: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state {state:?} lies outside the basin region")]
    OutsideBasin { state: Vec<f64> },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("no section crossing within t_max = {t_max}")]
    NoCrossing { t_max: f64 },

    #[error("tangential section crossing at t = {t} (grad s . f = {transversality:e})")]
    TangentialCrossing { t: f64, transversality: f64 },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("return-map derivative has an eigenvalue at 1; the cycle is not hyperbolic")]
    SingularReturnMap,

    #[error("cycle is not exponentially stable (floquet exponent {0})")]
    NotStable(f64),

    #[error("trajectory did not approach the cycle within {budget} time units (distance {distance:e})")]
    NoPhaseConvergence { budget: f64, distance: f64 },

    #[error("adjoint iteration did not settle to a periodic solution (change {change:e})")]
    AdjointDiverged { change: f64 },

    #[error("mean value did not converge by T = {t_max} (last estimate {estimate}, spread {spread:e})")]
    MeanValueDiverged {
        t_max: f64,
        estimate: f64,
        spread: f64,
    },

    #[error("isochron construction failed: {0}")]
    Isochron(String),

    #[error("trajectory too short: {0}")]
    TooShort(String),

    #[error("{0}")]
    Sweep(String),
}

pub type Result<T> = std::result::Result<T, Error>;
