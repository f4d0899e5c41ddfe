//! PID tuning by step response curve fitting.
//!
//! Given a plant transfer function (optionally with dead time) and a desired
//! closed-loop step response, [`tuner::tune`] searches for non-negative PID
//! gains minimizing the 2-norm of the sampled difference between the desired
//! and the achieved responses. Results come with stability, settling time,
//! overshoot, IAE and maximum sensitivity. Classical tuning rules live in
//! [`baselines`] for comparison.

pub mod baselines;
pub mod error;
pub mod lti;
pub mod metrics;
pub mod reference;
pub mod tuner;

pub use error::{Error, Result};
pub use lti::{
    pid_tf, simulate_closed_loop, step_response, DcGain, FrequencyResponse, PidGains, Polynomial,
    SimGrid, TimeSeries, TransferFunction,
};
pub use metrics::MetricsReport;
pub use reference::DesiredSpec;
pub use tuner::{evaluate, tune, TuneProblem, TuneResult, TuneStatus};
