//! Classical tuning rules used as comparators.
//!
//! Ziegler-Nichols from the ultimate point or from the open-loop reaction
//! curve, Lambda PI for first-order-plus-delay plants and pole-placement PI
//! for first-order plants.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::lti::{step_response, DcGain, PidGains, SimGrid, TransferFunction, DEFAULT_SAMPLES};
use crate::reference::{damping_from_overshoot, natural_frequency};

/// Phase sweep used to bracket the -180 degree crossover.
const SWEEP_LO: f64 = 1e-3;
const SWEEP_HI: f64 = 1e3;
const SWEEP_POINTS: usize = 4000;

/// Gain and period at which a proportional loop oscillates steadily.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltimatePoint {
    pub ku: f64,
    pub tu: f64,
    pub omega180: f64,
}

/// Tangent construction on an S-shaped open-loop step response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionCurve {
    /// Time at which the inflection tangent crosses zero.
    pub lag: f64,
    /// Maximum slope.
    pub rate: f64,
    pub t_inflection: f64,
}

/// Controller structure for the ultimate-cycle rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    P,
    Pi,
    Pid,
}

/// Locates the first -180 degree phase crossover of `plant`.
///
/// The continuous phase is scanned on a log grid from 1e-3 to 1e3 rad/s and
/// the crossing is bisected to 1e-9 relative in frequency.
pub fn ultimate_point(plant: &TransferFunction) -> Result<UltimatePoint> {
    let phase = |w: f64| -> Result<f64> { Ok(plant.freq_response(&[w])?.phases_rad[0] + PI) };
    let ratio = (SWEEP_HI / SWEEP_LO).powf(1.0 / (SWEEP_POINTS - 1) as f64);
    let mut lo = SWEEP_LO;
    let mut f_lo = phase(lo)?;
    if f_lo <= 0.0 {
        return Err(Error::NoPhaseCrossover {
            lo: SWEEP_LO,
            hi: SWEEP_HI,
        });
    }
    let mut bracket = None;
    for i in 1..SWEEP_POINTS {
        let w = SWEEP_LO * ratio.powi(i as i32);
        let f = phase(w)?;
        if f <= 0.0 {
            bracket = Some((lo, w));
            break;
        }
        lo = w;
        f_lo = f;
    }
    let Some((mut a, mut b)) = bracket else {
        return Err(Error::NoPhaseCrossover {
            lo: SWEEP_LO,
            hi: SWEEP_HI,
        });
    };
    debug_assert!(f_lo > 0.0);
    while (b - a) > 1e-12 * b {
        let mid = 0.5 * (a + b);
        if phase(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let omega180 = 0.5 * (a + b);
    let magnitude = plant.eval_jw(omega180)?.norm();
    if magnitude == 0.0 || !magnitude.is_finite() {
        return domain(format!("plant magnitude at the crossover is {magnitude}"));
    }
    Ok(UltimatePoint {
        ku: 1.0 / magnitude,
        tu: 2.0 * PI / omega180,
        omega180,
    })
}

/// Default grid for reaction-curve identification: ten dominant time
/// constants (plus dead time), 2000 samples.
pub fn reaction_grid(plant: &TransferFunction) -> Result<SimGrid> {
    let slowest = plant
        .poles()?
        .iter()
        .map(|p| -p.re)
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !slowest.is_finite() {
        return domain("reaction curve needs a plant with at least one stable pole");
    }
    SimGrid::new(plant.delay() + 10.0 / slowest, DEFAULT_SAMPLES)
}

/// Identifies lag and rate from the simulated open-loop step response.
///
/// The slope is estimated by central differences; its discrete maximum is
/// refined with a parabola through the neighbouring slopes.
pub fn reaction_curve(plant: &TransferFunction, grid: &SimGrid) -> Result<ReactionCurve> {
    let y = step_response(plant, grid)?;
    if y.is_diverged() {
        return domain("open-loop step response diverges");
    }
    let v = y.values();
    let dt = y.grid().dt();
    if v.len() < 5 {
        return domain("reaction curve needs at least 5 samples");
    }
    let slope: Vec<f64> = (1..v.len() - 1)
        .map(|i| (v[i + 1] - v[i - 1]) / (2.0 * dt))
        .collect();
    let (k, &s_max) = slope
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty slope");
    // slope[k] sits at sample k + 1
    if k == 0 || k + 1 == slope.len() || s_max <= 0.0 {
        return Err(Error::NotSShaped);
    }
    let (sm, s0, sp) = (slope[k - 1], slope[k], slope[k + 1]);
    let curvature = sm - 2.0 * s0 + sp;
    let (offset, rate) = if curvature < 0.0 {
        let offset = 0.5 * (sm - sp) / curvature;
        (offset, s0 - 0.25 * (sm - sp) * offset)
    } else {
        (0.0, s0)
    };
    let t_inflection = y.grid().time(k + 1) + offset * dt;
    let y_at = {
        // quadratic interpolation of the response around the inflection
        let (ym, y0, yp) = (v[k], v[k + 1], v[k + 2]);
        y0 + 0.5 * offset * (yp - ym) + 0.5 * offset * offset * (yp - 2.0 * y0 + ym)
    };
    let lag = t_inflection - y_at / rate;
    if lag <= 0.0 {
        return Err(Error::NotSShaped);
    }
    Ok(ReactionCurve {
        lag,
        rate,
        t_inflection,
    })
}

/// Ziegler-Nichols reaction-curve PID: `Kp = 1.2/(R·L)`, `Ti = 2L`, `Td = L/2`.
pub fn zn_reaction_pid(rc: &ReactionCurve) -> PidGains {
    let kp = 1.2 / (rc.rate * rc.lag);
    let ti = 2.0 * rc.lag;
    let td = 0.5 * rc.lag;
    PidGains {
        kp,
        ki: kp / ti,
        kd: kp * td,
    }
}

/// Ziegler-Nichols ultimate-cycle table.
///
/// | structure | Kp      | Ti     | Td   |
/// |-----------|---------|--------|------|
/// | P         | 0.5 Ku  |        |      |
/// | PI        | 0.45 Ku | Tu/1.2 |      |
/// | PID       | 0.6 Ku  | Tu/2   | Tu/8 |
pub fn zn_ultimate(up: &UltimatePoint, structure: Structure) -> PidGains {
    match structure {
        Structure::P => PidGains {
            kp: 0.5 * up.ku,
            ki: 0.0,
            kd: 0.0,
        },
        Structure::Pi => {
            let kp = 0.45 * up.ku;
            PidGains {
                kp,
                ki: kp / (up.tu / 1.2),
                kd: 0.0,
            }
        }
        Structure::Pid => {
            let kp = 0.6 * up.ku;
            PidGains {
                kp,
                ki: kp / (up.tu / 2.0),
                kd: kp * up.tu / 8.0,
            }
        }
    }
}

/// Lambda PI for `K·exp(-sL)/(1 + sT)`: `Kp = T/(K(L + Tcl))`, `Ki = Kp/T`.
///
/// The controller zero cancels the plant pole. `Tcl` outside `(T, 3T)` is
/// allowed with a warning.
pub fn lambda_pi(k: f64, t: f64, l: f64, tcl: f64) -> Result<PidGains> {
    for (name, v) in [("K", k), ("T", t), ("Tcl", tcl)] {
        if !(v.is_finite() && v > 0.0) {
            return domain(format!("{name} must be finite and > 0, got {v}"));
        }
    }
    if !(l.is_finite() && l >= 0.0) {
        return domain(format!("L must be finite and >= 0, got {l}"));
    }
    if !(t < tcl && tcl < 3.0 * t) {
        log::warn!(
            "Tcl = {tcl} lies outside the recommended range ({t}, {})",
            3.0 * t
        );
    }
    let kp = t / (k * (l + tcl));
    PidGains::pi(kp, kp / t)
}

/// Pole-placement PI for a unit-gain plant `1/(1 + sT)`.
///
/// Matches the closed-loop characteristic polynomial `T s² + (1 + Kp) s + Ki`
/// to `T (s² + 2ζωn s + ωn²)`, with ζ and ωn derived from `po` and `ts`:
/// `Kp = 2ζωn·T - 1`, `Ki = ωn²·T`.
pub fn pole_placement_pi_first_order(t: f64, po: f64, ts: f64) -> Result<PidGains> {
    if !(t.is_finite() && t > 0.0) {
        return domain(format!("T must be finite and > 0, got {t}"));
    }
    let zeta = damping_from_overshoot(po)?;
    let wn = natural_frequency(zeta, ts, po == 0.0)?;
    let kp = 2.0 * zeta * wn * t - 1.0;
    if kp < 0.0 {
        return Err(Error::Infeasible(format!(
            "target with PO = {po}% and Ts = {ts} s is slower than the open-loop plant (Kp = {kp})"
        )));
    }
    PidGains::pi(kp, wn * wn * t)
}

/// First-order-plus-delay parameters `(K, T, L)` of `plant`, if it has that form.
pub fn fotd_parameters(plant: &TransferFunction) -> Option<(f64, f64, f64)> {
    if plant.num().degree() != 0 || plant.den().degree() != 1 {
        return None;
    }
    // den is monic: s + a, so plant = (b/a)/(1 + s/a)
    let a = plant.den().constant_term();
    if a <= 0.0 {
        return None;
    }
    let k = match plant.dc_gain().ok()? {
        DcGain::Finite(k) if k > 0.0 => k,
        _ => return None,
    };
    Some((k, 1.0 / a, plant.delay()))
}
