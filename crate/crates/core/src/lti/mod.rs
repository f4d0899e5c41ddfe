//! Polynomial and transfer-function algebra, simulation and frequency response.

mod pid;
mod polynomial;
mod simulation;
mod transfer_function;

pub use pid::{pid_tf, PidGains};
pub use polynomial::{Polynomial, ROOT_RESIDUAL_TOLERANCE, TRIM_TOLERANCE};
pub use simulation::{
    simulate_closed_loop, simulate_discrete_loop, step_response, SimGrid, TimeSeries,
    DEFAULT_SAMPLES, DIVERGENCE_LIMIT,
};
pub use transfer_function::{DcGain, FrequencyResponse, TransferFunction};
