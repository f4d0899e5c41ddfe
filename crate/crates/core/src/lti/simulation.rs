//! Step-response simulation on uniform grids.
//!
//! Rational dynamics are realized in controllable canonical form and
//! discretized with an exact zero-order hold, which is exact for step
//! inputs. Dead time is an input shift: exact (fractional) for open-loop
//! step responses, an integer-sample buffer inside feedback loops.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::pid::{pid_tf, PidGains};
use super::transfer_function::TransferFunction;
use crate::error::{domain, Error, Result};

/// Magnitude beyond which a simulation is declared diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e100;

/// Default number of samples on a simulation grid.
pub const DEFAULT_SAMPLES: usize = 2000;

/// Uniform grid `0, dt, ..., t_final` with `n_samples` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    t_final: f64,
    n_samples: usize,
}

impl SimGrid {
    pub fn new(t_final: f64, n_samples: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return domain(format!("t_final must be finite and > 0, got {t_final}"));
        }
        if n_samples < 2 {
            return domain(format!("n_samples must be >= 2, got {n_samples}"));
        }
        Ok(Self { t_final, n_samples })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.n_samples - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n_samples {
            self.t_final
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.time(i)).collect()
    }

    /// Number of samples spanned by `delay`, if it is an integer multiple of `dt`.
    pub fn delay_samples(&self, delay: f64) -> Option<usize> {
        if delay == 0.0 {
            return Some(0);
        }
        let ratio = delay / self.dt();
        let rounded = ratio.round();
        ((ratio - rounded).abs() <= 1e-9 * ratio && rounded >= 1.0).then_some(rounded as usize)
    }

    /// A grid on which `delay` spans a whole number of samples.
    ///
    /// Prefers the smallest sample count `>= n_samples` (up to 4x) that keeps
    /// `t_final`; otherwise shrinks `dt` to `delay / ceil(delay/dt)` and adds
    /// samples until the original horizon is covered.
    pub fn aligned_to_delay(&self, delay: f64) -> SimGrid {
        if self.delay_samples(delay).is_some() {
            return *self;
        }
        for n in self.n_samples + 1..=4 * self.n_samples {
            let candidate = SimGrid {
                t_final: self.t_final,
                n_samples: n,
            };
            if candidate.delay_samples(delay).is_some() {
                return candidate;
            }
        }
        let steps = (delay / self.dt()).ceil();
        let dt = delay / steps;
        let intervals = (self.t_final / dt - 1e-9).ceil();
        SimGrid {
            t_final: dt * intervals,
            n_samples: intervals as usize + 1,
        }
    }
}

/// Signal sampled on a [`SimGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: SimGrid,
    values: Vec<f64>,
    diverged: bool,
}

impl TimeSeries {
    pub fn new(grid: SimGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_samples() {
            return domain(format!(
                "series has {} values but the grid has {} samples",
                values.len(),
                grid.n_samples()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("series values must be finite");
        }
        Ok(Self {
            grid,
            values,
            diverged: false,
        })
    }

    /// Builds a series from arbitrary sample times by linear interpolation onto `grid`.
    ///
    /// The samples must cover the whole grid horizon; no extrapolation is done.
    pub fn from_samples(times: &[f64], values: &[f64], grid: SimGrid) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return domain("trajectory needs at least two (t, y) samples of equal length");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("trajectory times must be strictly increasing");
        }
        if times.iter().chain(values).any(|v| !v.is_finite()) {
            return domain("trajectory samples must be finite");
        }
        let (t0, t1) = (times[0], times[times.len() - 1]);
        let tol = 1e-9 * grid.t_final();
        if t0 > tol || t1 < grid.t_final() - tol {
            return domain(format!(
                "trajectory spans [{t0}, {t1}] s but the horizon is [0, {}] s; extrapolation is not allowed",
                grid.t_final()
            ));
        }
        let mut out = Vec::with_capacity(grid.n_samples());
        let mut j = 0;
        for t in grid.times() {
            let t = t.clamp(t0, t1);
            while j + 2 < times.len() && times[j + 1] < t {
                j += 1;
            }
            let w = ((t - times[j]) / (times[j + 1] - times[j])).clamp(0.0, 1.0);
            out.push(values[j] + w * (values[j + 1] - values[j]));
        }
        Self::new(grid, out)
    }

    pub(crate) fn from_simulation(grid: SimGrid, values: Vec<f64>, diverged: bool) -> Self {
        Self {
            grid,
            values,
            diverged,
        }
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when the simulation blew up; trailing values are then NaN.
    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Largest finite magnitude in the series.
    pub fn max_abs_finite(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Resamples onto another grid; the target horizon must not exceed ours.
    pub fn resample(&self, grid: SimGrid) -> Result<TimeSeries> {
        if self.grid == grid {
            return Ok(self.clone());
        }
        TimeSeries::from_samples(&self.times(), &self.values, grid)
    }
}

/// Continuous-time controllable canonical realization of a proper transfer function.
#[derive(Debug, Clone)]
pub(crate) struct StateSpace {
    n: usize,
    // row-major n x n
    a: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl StateSpace {
    pub(crate) fn realize(sys: &TransferFunction) -> Result<Self> {
        if !sys.is_proper() {
            return Err(Error::Improper(format!(
                "cannot simulate {sys}: numerator degree exceeds denominator degree"
            )));
        }
        // den is monic by construction
        let den = sys.den().coeffs();
        let n = den.len() - 1;
        let num = sys.num().padded(n + 1);
        let d = num[0];
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            a[j] = -den[j + 1];
        }
        for i in 1..n {
            a[i * n + i - 1] = 1.0;
        }
        let c = (1..=n).map(|i| num[i] - d * den[i]).collect();
        Ok(Self { n, a, c, d })
    }

    /// Exact zero-order-hold discretization over `dt`.
    pub(crate) fn discretize(&self, dt: f64) -> Discrete {
        let n = self.n;
        if n == 0 {
            return Discrete {
                n,
                ad: Vec::new(),
                bd: Vec::new(),
                c: Vec::new(),
                d: self.d,
            };
        }
        let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.a[i * n + j] * dt;
            }
        }
        // B = e1 in controllable canonical form
        m[(0, n)] = dt;
        let e = m.exp();
        let mut ad = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                ad[i * n + j] = e[(i, j)];
            }
        }
        let bd = (0..n).map(|i| e[(i, n)]).collect();
        Discrete {
            n,
            ad,
            bd,
            c: self.c.clone(),
            d: self.d,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Discrete {
    n: usize,
    ad: Vec<f64>,
    bd: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl Discrete {
    fn output(&self, x: &[f64], u: f64) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.d * u
    }

    /// `x <- Ad x + Bd u`, using `scratch` as workspace.
    fn advance(&self, x: &mut [f64], u: f64, scratch: &mut [f64]) {
        let n = self.n;
        if n == 0 {
            return;
        }
        for ((s, row), b) in scratch
            .iter_mut()
            .zip(self.ad.chunks_exact(n))
            .zip(&self.bd)
        {
            *s = row.iter().zip(x.iter()).map(|(a, x)| a * x).sum::<f64>() + b * u;
        }
        x.copy_from_slice(&scratch[..n]);
    }
}

fn blew_up(v: f64) -> bool {
    !v.is_finite() || v.abs() > DIVERGENCE_LIMIT
}

/// Unit-step response of a proper system sampled on `grid`.
///
/// `y(0)` equals the direct feedthrough (0 for strictly proper systems).
/// Dead time shifts the response exactly, including when it is not a whole
/// number of samples.
pub fn step_response(sys: &TransferFunction, grid: &SimGrid) -> Result<TimeSeries> {
    let ss = StateSpace::realize(sys)?;
    let dt = grid.dt();
    let disc = ss.discretize(dt);
    let n_samples = grid.n_samples();
    let mut values = vec![0.0; n_samples];

    let delay = sys.delay();
    let first = match grid.delay_samples(delay) {
        Some(k) => k,
        None => (delay / dt).ceil() as usize,
    };
    if first >= n_samples {
        return Ok(TimeSeries::from_simulation(*grid, values, false));
    }
    let lead_in = grid.time(first) - delay;
    let mut x = if lead_in > 1e-9 * dt {
        ss.discretize(lead_in).bd
    } else {
        vec![0.0; ss.n]
    };
    let mut scratch = vec![0.0; ss.n];
    let mut diverged = false;
    for k in first..n_samples {
        let y = disc.output(&x, 1.0);
        if blew_up(y) || x.iter().any(|v| blew_up(*v)) {
            diverged = true;
            values[k..].fill(f64::NAN);
            break;
        }
        values[k] = y;
        disc.advance(&mut x, 1.0, &mut scratch);
    }
    Ok(TimeSeries::from_simulation(*grid, values, diverged))
}

/// Unit-step setpoint response of the unity-feedback loop `PID · plant`.
///
/// Delay-free plants are closed symbolically and simulated exactly. Plants
/// with dead time are closed per sample by [`simulate_discrete_loop`], on a
/// grid aligned so the delay spans whole samples; the returned series
/// carries that grid.
pub fn simulate_closed_loop(
    plant: &TransferFunction,
    gains: &PidGains,
    grid: &SimGrid,
) -> Result<TimeSeries> {
    if !plant.is_proper() {
        return Err(Error::Improper(format!("plant {plant} is not proper")));
    }
    if plant.delay() > 0.0 {
        return simulate_discrete_loop(plant, gains, grid);
    }
    let closed = pid_tf(gains)?.series(plant).feedback_unity()?;
    step_response(&closed, grid)
}

/// Per-sample closure of the PID loop around a (possibly delayed) plant.
///
/// At each sample the error uses the latest plant output, the integral is
/// trapezoidal, the derivative a backward difference (both starting from a
/// zero error before the step), and the control is held over the interval
/// while the plant advances one zero-order-hold step behind a dead-time
/// buffer of `delay/dt` samples. This approximates the ideal `Kd·s`.
pub fn simulate_discrete_loop(
    plant: &TransferFunction,
    gains: &PidGains,
    grid: &SimGrid,
) -> Result<TimeSeries> {
    gains.validate()?;
    if !(gains.kp.is_finite() && gains.ki.is_finite() && gains.kd.is_finite()) {
        return domain("controller gains must be finite");
    }
    let grid = grid.aligned_to_delay(plant.delay());
    let dead_samples = grid
        .delay_samples(plant.delay())
        .expect("aligned grid spans the delay");
    let dt = grid.dt();
    let disc = StateSpace::realize(plant)?.discretize(dt);

    let n_samples = grid.n_samples();
    let mut values = vec![0.0; n_samples];
    let mut x = vec![0.0; disc.n];
    let mut scratch = vec![0.0; disc.n];
    let mut buffer: VecDeque<f64> = std::iter::repeat_n(0.0, dead_samples).collect();
    let (mut integral, mut prev_error, mut applied) = (0.0, 0.0, 0.0);
    let mut diverged = false;

    for k in 0..n_samples {
        let y = disc.output(&x, applied);
        if blew_up(y) || blew_up(integral) || x.iter().any(|v| blew_up(*v)) {
            diverged = true;
            values[k..].fill(f64::NAN);
            break;
        }
        values[k] = y;
        let error = 1.0 - y;
        integral += 0.5 * dt * (error + prev_error);
        let u = gains.kp * error + gains.ki * integral + gains.kd * (error - prev_error) / dt;
        prev_error = error;
        buffer.push_back(u);
        applied = buffer.pop_front().unwrap_or(u);
        disc.advance(&mut x, applied, &mut scratch);
    }
    Ok(TimeSeries::from_simulation(grid, values, diverged))
}
