use thiserror::Error;

/// Errors raised by the modelling, simulation and tuning routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A system (or controller/plant pairing) cannot be realized because it is improper.
    #[error("improper system: {0}")]
    Improper(String),

    /// A frequency sample hits a pole on the imaginary axis.
    #[error("frequency response is singular at omega = {omega} rad/s")]
    Singular { omega: f64 },

    /// Both numerator and denominator vanish at s = 0.
    #[error("dc gain is indeterminate (0/0)")]
    Indeterminate,

    #[error("no -180 degree phase crossover between {lo} and {hi} rad/s")]
    NoPhaseCrossover { lo: f64, hi: f64 },

    #[error("response does not stay inside the 2% band before the end of the horizon")]
    NotSettled,

    #[error("step response is not S-shaped (maximum slope at t = 0)")]
    NotSShaped,

    /// The requested target cannot be reached with non-negative gains.
    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
