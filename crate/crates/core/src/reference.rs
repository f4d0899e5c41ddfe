//! Desired closed-loop responses.
//!
//! A target is either a second-order model shaped by settling time and
//! overshoot (or directly by damping and natural frequency), a first-order
//! model with dead time, an arbitrary transfer function, or a sampled
//! trajectory.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::lti::{step_response, Polynomial, SimGrid, TimeSeries, TransferFunction};

/// Overshoots below this (but above zero) make the underdamped formula
/// inconsistent with the critically damped branch.
const TINY_OVERSHOOT_PCT: f64 = 0.01;

/// Specification of the response the tuned loop should follow.
#[derive(Debug, Clone, PartialEq)]
pub enum DesiredSpec {
    /// `ωn²/(s² + 2ζωn s + ωn²)` from percent overshoot and 2% settling time.
    SecondOrder {
        po: f64,
        ts: f64,
    },
    /// Second-order model given directly by damping ratio and natural frequency.
    ZetaOmega {
        zeta: f64,
        wn: f64,
    },
    /// `exp(-s·delay)/(1 + s·tcl)`; `delay` must match the plant's dead time.
    Fotd {
        tcl: f64,
        delay: f64,
    },
    Custom(TransferFunction),
    Trajectory(TimeSeries),
}

impl DesiredSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DesiredSpec::SecondOrder { po, ts } => {
                damping_from_overshoot(*po)?;
                positive("ts", *ts)
            }
            DesiredSpec::ZetaOmega { zeta, wn } => {
                if !(zeta.is_finite() && *zeta > 0.0 && *zeta <= 1.0) {
                    return domain(format!("zeta must lie in (0, 1], got {zeta}"));
                }
                positive("wn", *wn)
            }
            DesiredSpec::Fotd { tcl, delay } => {
                positive("tcl", *tcl)?;
                if !(delay.is_finite() && *delay >= 0.0) {
                    return domain(format!("delay must be >= 0, got {delay}"));
                }
                Ok(())
            }
            DesiredSpec::Custom(tf) => {
                if !tf.is_proper() {
                    return domain("custom target must be a proper transfer function");
                }
                Ok(())
            }
            DesiredSpec::Trajectory(_) => Ok(()),
        }
    }

    /// The target as a transfer function (absent for raw trajectories).
    pub fn transfer_function(&self) -> Result<Option<TransferFunction>> {
        Ok(Some(match self {
            DesiredSpec::SecondOrder { po, ts } => make_second_order(*po, *ts)?,
            DesiredSpec::ZetaOmega { zeta, wn } => make_second_order_direct(*zeta, *wn)?,
            DesiredSpec::Fotd { tcl, delay } => make_fotd(*tcl, *delay)?,
            DesiredSpec::Custom(tf) => tf.clone(),
            DesiredSpec::Trajectory(_) => return Ok(None),
        }))
    }

    /// Predicted 2% settling time of the target.
    ///
    /// Second-order targets report their specified (or envelope) settling
    /// time, FOTD targets `delay + 4·tcl`, custom systems `delay + 4/σ` with σ
    /// the slowest pole decay rate, trajectories their horizon.
    pub fn predicted_settling_time(&self) -> Result<f64> {
        Ok(match self {
            DesiredSpec::SecondOrder { ts, .. } => *ts,
            DesiredSpec::ZetaOmega { zeta, wn } => 4.0 / (zeta * wn),
            DesiredSpec::Fotd { tcl, delay } => fotd_settling_estimates(*tcl, *delay).1,
            DesiredSpec::Custom(tf) => {
                let slowest = tf
                    .poles()?
                    .iter()
                    .map(|p| -p.re)
                    .filter(|s| *s > 0.0)
                    .fold(f64::INFINITY, f64::min);
                if slowest.is_finite() {
                    tf.delay() + 4.0 / slowest
                } else {
                    tf.delay() + 1.0
                }
            }
            DesiredSpec::Trajectory(series) => series.grid().t_final(),
        })
    }

    /// Dead time the target expects in the plant, when the target fixes one.
    pub fn required_plant_delay(&self) -> Option<f64> {
        match self {
            DesiredSpec::Fotd { delay, .. } => Some(*delay),
            _ => None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        domain(format!("{name} must be finite and > 0, got {v}"))
    }
}

/// Damping ratio giving `po` percent overshoot; `po = 0` selects critical damping.
pub fn damping_from_overshoot(po: f64) -> Result<f64> {
    if !(po.is_finite() && (0.0..100.0).contains(&po)) {
        return domain(format!("overshoot must satisfy 0 <= PO < 100, got {po}"));
    }
    if po == 0.0 {
        return Ok(1.0);
    }
    if po < TINY_OVERSHOOT_PCT {
        log::warn!(
            "PO = {po}% is nearly critically damped; the underdamped settling formula \
             disagrees with the critically damped branch here"
        );
    }
    let l = (po / 100.0).ln();
    Ok(-l / (PI * PI + l * l).sqrt())
}

/// Natural frequency for a 2% settling time: `4/(ζ·Ts)`, or `6/(ζ·Ts)` when critically damped.
pub fn natural_frequency(zeta: f64, ts: f64, critically_damped: bool) -> Result<f64> {
    if !(zeta.is_finite() && zeta > 0.0 && zeta <= 1.0) {
        return domain(format!("zeta must lie in (0, 1], got {zeta}"));
    }
    positive("ts", ts)?;
    let numerator = if critically_damped { 6.0 } else { 4.0 };
    Ok(numerator / (zeta * ts))
}

/// Second-order target from overshoot and settling time.
pub fn make_second_order(po: f64, ts: f64) -> Result<TransferFunction> {
    let zeta = damping_from_overshoot(po)?;
    let wn = natural_frequency(zeta, ts, po == 0.0)?;
    make_second_order_direct(zeta, wn)
}

/// `ωn²/(s² + 2ζωn s + ωn²)` with unity DC gain.
pub fn make_second_order_direct(zeta: f64, wn: f64) -> Result<TransferFunction> {
    DesiredSpec::ZetaOmega { zeta, wn }.validate()?;
    TransferFunction::new(
        Polynomial::constant(wn * wn),
        Polynomial::new(vec![1.0, 2.0 * zeta * wn, wn * wn]),
        0.0,
    )
}

/// First-order target with dead time, `exp(-s·delay)/(1 + s·tcl)`.
pub fn make_fotd(tcl: f64, delay: f64) -> Result<TransferFunction> {
    DesiredSpec::Fotd { tcl, delay }.validate()?;
    TransferFunction::new(Polynomial::one(), Polynomial::new(vec![tcl, 1.0]), delay)
}

/// Settling estimates `(4·tcl, delay + 4·tcl)` for an FOTD target.
///
/// The first ignores the dead time; both are reported since the model's
/// response cannot settle before the delay has elapsed.
pub fn fotd_settling_estimates(tcl: f64, delay: f64) -> (f64, f64) {
    (4.0 * tcl, delay + 4.0 * tcl)
}

/// Desired response sampled on `grid`.
///
/// Trajectories are linearly interpolated and must cover the whole horizon.
pub fn desired_response(spec: &DesiredSpec, grid: &SimGrid) -> Result<TimeSeries> {
    spec.validate()?;
    match spec {
        DesiredSpec::Trajectory(series) => series.resample(*grid),
        _ => {
            let tf = spec
                .transfer_function()?
                .expect("non-trajectory targets have a model");
            step_response(&tf, grid)
        }
    }
}
