//! Time-domain performance, loop sensitivity and stability verdicts.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::lti::{DcGain, TimeSeries, TransferFunction};

/// Settling band as a fraction of the final value.
pub const SETTLING_BAND: f64 = 0.02;

pub const DEFAULT_OMEGA_LO: f64 = 1e-3;
pub const DEFAULT_OMEGA_HI: f64 = 1e3;
pub const DEFAULT_OMEGA_POINTS: usize = 4000;

/// Poles must lie left of this real part to count as stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Performance and robustness figures of one closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// 2% settling time; absent when unstable or not settled within the horizon.
    pub settling_time: Option<f64>,
    pub overshoot_pct: f64,
    /// Integral of the absolute error with respect to the unit setpoint.
    pub iae: f64,
    pub ms: f64,
    /// Frequency at which `ms` was found.
    pub ms_omega: f64,
    pub decay_ratio: Option<f64>,
    pub stable: bool,
    pub final_value: f64,
}

/// Peak of `|S(jω)|` and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPeak {
    pub ms: f64,
    pub omega: f64,
}

fn check_series(y: &TimeSeries, final_value: f64) -> Result<()> {
    if y.is_diverged() {
        return domain("cannot measure a diverged response");
    }
    if !final_value.is_finite() || final_value == 0.0 {
        return domain(format!(
            "final value must be finite and nonzero, got {final_value}"
        ));
    }
    Ok(())
}

/// Time after which the response stays within ±2% of `final_value`.
///
/// The crossing into the band is interpolated linearly between the last
/// sample outside the band and the next one.
pub fn settling_time_2pct(y: &TimeSeries, final_value: f64) -> Result<f64> {
    check_series(y, final_value)?;
    let band = SETTLING_BAND * final_value.abs();
    let excess: Vec<f64> = y
        .values()
        .iter()
        .map(|v| (v - final_value).abs() - band)
        .collect();
    let Some(last_out) = excess.iter().rposition(|e| *e > 0.0) else {
        return Ok(0.0);
    };
    if last_out + 1 == excess.len() {
        return Err(Error::NotSettled);
    }
    let (e0, e1) = (excess[last_out], excess[last_out + 1]);
    let t0 = y.grid().time(last_out);
    Ok(t0 + y.grid().dt() * e0 / (e0 - e1))
}

/// Peak excess over `final_value` in percent, floored at zero.
pub fn percent_overshoot(y: &TimeSeries, final_value: f64) -> f64 {
    if final_value == 0.0 || !final_value.is_finite() {
        return 0.0;
    }
    let peak = y
        .values()
        .iter()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    ((peak - final_value) / final_value * 100.0).max(0.0)
}

/// Trapezoidal integral of `|reference - y|` over the grid.
pub fn iae(y: &TimeSeries, reference: f64) -> f64 {
    let dt = y.grid().dt();
    let err: Vec<f64> = y.values().iter().map(|v| (reference - v).abs()).collect();
    let dts = (0..err.len().saturating_sub(1)).map(|i| y.grid().time(i + 1) - y.grid().time(i));
    err.windows(2)
        .zip(dts)
        .map(|(w, h)| 0.5 * (w[0] + w[1]) * if h > 0.0 { h } else { dt })
        .sum()
}

/// Ratio of the second to the first overshoot peak excess over `final_value`.
///
/// Peak heights are refined with a three-point parabola. Absent when fewer
/// than two peaks rise above the final value.
pub fn decay_ratio(y: &TimeSeries, final_value: f64) -> Option<f64> {
    if !final_value.is_finite() || y.is_diverged() {
        return None;
    }
    let v = y.values();
    let floor = 1e-9 * final_value.abs().max(1e-300);
    let mut excesses = Vec::with_capacity(2);
    for i in 1..v.len().saturating_sub(1) {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] {
            let curvature = v[i + 1] - 2.0 * v[i] + v[i - 1];
            let height = if curvature < 0.0 {
                v[i] - (v[i + 1] - v[i - 1]).powi(2) / (8.0 * curvature)
            } else {
                v[i]
            };
            let excess = (height - final_value) * final_value.signum();
            if excess > floor {
                excesses.push(excess);
                if excesses.len() == 2 {
                    return Some(excesses[1] / excesses[0]);
                }
            }
        }
    }
    None
}

/// Decay ratio of an ideal second-order response, `exp(-2πζ/√(1-ζ²))`.
pub fn analytic_decay_ratio(zeta: f64) -> f64 {
    (-2.0 * std::f64::consts::PI * zeta / (1.0 - zeta * zeta).sqrt()).exp()
}

/// Percent overshoot of an ideal second-order response, `100·exp(-πζ/√(1-ζ²))`.
pub fn analytic_overshoot(zeta: f64) -> f64 {
    100.0 * (-std::f64::consts::PI * zeta / (1.0 - zeta * zeta).sqrt()).exp()
}

fn sensitivity_at(loop_tf: &TransferFunction, omega: f64) -> Result<f64> {
    let l = loop_tf.eval_jw(omega)?;
    let denom = Complex64::new(1.0, 0.0) + l;
    if denom.norm() == 0.0 {
        return Err(Error::Singular { omega });
    }
    Ok(1.0 / denom.norm())
}

/// Maximum sensitivity `max |1/(1 + L(jω))|` over a log-spaced sweep.
///
/// The best grid sample is refined by golden-section search in `log ω`
/// between its neighbours; the refinement never lowers the grid maximum.
pub fn max_sensitivity(
    loop_tf: &TransferFunction,
    omega_lo: f64,
    omega_hi: f64,
    n_points: usize,
) -> Result<SensitivityPeak> {
    if !(omega_lo > 0.0 && omega_hi > omega_lo && omega_hi.is_finite()) || n_points < 2 {
        return domain("sensitivity sweep needs 0 < omega_lo < omega_hi and at least 2 points");
    }
    if !loop_tf.is_proper() {
        return Err(Error::Improper(format!("loop {loop_tf} is not proper")));
    }
    let (log_lo, log_hi) = (omega_lo.ln(), omega_hi.ln());
    let step = (log_hi - log_lo) / (n_points - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..n_points {
        let s = sensitivity_at(loop_tf, (log_lo + step * i as f64).exp())?;
        if s > best.1 {
            best = (i, s);
        }
    }
    let (i, grid_ms) = best;
    let grid_omega = (log_lo + step * i as f64).exp();

    let mut a = log_lo + step * i.saturating_sub(1) as f64;
    let mut b = log_lo + step * (i + 1).min(n_points - 1) as f64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |x: f64| sensitivity_at(loop_tf, x.exp());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > 1e-6 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let refined = f(x)?;
    if refined > grid_ms {
        Ok(SensitivityPeak {
            ms: refined,
            omega: x.exp(),
        })
    } else {
        Ok(SensitivityPeak {
            ms: grid_ms,
            omega: grid_omega,
        })
    }
}

/// [`max_sensitivity`] over the default sweep (1e-3 to 1e3 rad/s, 4000 points).
pub fn max_sensitivity_default(loop_tf: &TransferFunction) -> Result<SensitivityPeak> {
    max_sensitivity(
        loop_tf,
        DEFAULT_OMEGA_LO,
        DEFAULT_OMEGA_HI,
        DEFAULT_OMEGA_POINTS,
    )
}

/// What a stability verdict is based on.
#[derive(Debug, Clone, Copy)]
pub enum StabilityEvidence<'a> {
    /// A delay-free closed loop: all poles must lie strictly in the left half-plane.
    Rational(&'a TransferFunction),
    /// A simulated response of a loop with dead time.
    Simulated {
        response: &'a TimeSeries,
        final_value: f64,
    },
}

/// Stability verdict. Simulated evidence passes when the response is finite
/// and stays within 2% of the predicted final value over the last 10% of the horizon.
pub fn is_stable(evidence: StabilityEvidence<'_>) -> bool {
    match evidence {
        StabilityEvidence::Rational(closed) => match closed.poles() {
            Ok(poles) => poles.iter().all(|p| p.re < -STABILITY_MARGIN),
            Err(_) => false,
        },
        StabilityEvidence::Simulated {
            response,
            final_value,
        } => {
            if response.is_diverged() || !final_value.is_finite() {
                return false;
            }
            let v = response.values();
            let tail = v.len() - v.len().div_ceil(10);
            let band = SETTLING_BAND * final_value.abs();
            v.iter().all(|x| x.is_finite())
                && v[tail..].iter().all(|x| (x - final_value).abs() <= band)
        }
    }
}

/// Steady-state output of the unity-feedback loop around `loop_tf` for a unit step.
pub fn closed_loop_final_value(loop_tf: &TransferFunction) -> Option<f64> {
    match loop_tf.dc_gain().ok()? {
        DcGain::Infinite => Some(1.0),
        DcGain::Finite(l) if (1.0 + l) != 0.0 => Some(l / (1.0 + l)),
        DcGain::Finite(_) => None,
    }
}
