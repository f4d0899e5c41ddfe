//! Step response curve fitting of PID gains.
//!
//! The tuner minimizes the 2-norm of the sampled difference between a
//! desired closed-loop step response and the one achieved by a PID
//! controller in unity feedback with the plant, over non-negative,
//! box-bounded gains.
//!
//! ```
//! use pidfit::reference::DesiredSpec;
//! use pidfit::tuner::{tune, TuneProblem};
//! use pidfit::{PidGains, SimGrid, TransferFunction};
//!
//! let plant = TransferFunction::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap();
//! let problem = TuneProblem::builder(plant, DesiredSpec::SecondOrder { po: 0.0, ts: 1.0 })
//!     .bounds(PidGains::ZERO, PidGains::new(f64::INFINITY, f64::INFINITY, 0.0).unwrap())
//!     .grid(SimGrid::new(4.0, 2000).unwrap())
//!     .build()
//!     .unwrap();
//! let result = tune(&problem).unwrap();
//! assert!(result.metrics.stable);
//! assert_eq!(result.gains.kd, 0.0);
//! ```

mod optimizer;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::lti::{
    pid_tf, simulate_closed_loop, PidGains, SimGrid, TimeSeries, TransferFunction, DEFAULT_SAMPLES,
};
use crate::metrics::{
    closed_loop_final_value, decay_ratio, iae, is_stable, max_sensitivity_default,
    percent_overshoot, settling_time_2pct, MetricsReport, StabilityEvidence,
};
use crate::reference::{desired_response, fotd_settling_estimates, DesiredSpec};
use optimizer::{minimize, Sample, Settings};

pub const DEFAULT_MAX_EVALS: usize = 3000;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Finite stand-in for an infinite upper bound.
pub const GAIN_CAP: f64 = 1e6;
/// Objective values at or above this are replaced by the divergence penalty.
pub const PENALTY_FLOOR: f64 = 1e6;
/// Default horizon as a multiple of the target's predicted settling time.
pub const HORIZON_FACTOR: f64 = 4.0;

/// Objective value of a diverged (or wildly off) candidate.
///
/// Grows with the magnitude the response reached, so the search is pushed
/// back toward milder gains.
pub fn divergence_penalty(magnitude: f64) -> f64 {
    PENALTY_FLOOR + magnitude.abs().ln_1p()
}

/// Whether the best-found loop is stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneStatus {
    Stable,
    Unstable,
}

/// A fully specified tuning problem.
#[derive(Debug, Clone)]
pub struct TuneProblem {
    plant: TransferFunction,
    spec: DesiredSpec,
    bounds_lo: PidGains,
    bounds_hi: PidGains,
    grid: SimGrid,
    max_evals: usize,
    tol: f64,
    n_starts: usize,
    seed: u64,
    desired: TimeSeries,
}

/// Builder for [`TuneProblem`]; unset fields take their documented defaults.
#[derive(Debug, Clone)]
pub struct TuneProblemBuilder {
    plant: TransferFunction,
    spec: DesiredSpec,
    bounds_lo: PidGains,
    bounds_hi: PidGains,
    grid: Option<SimGrid>,
    max_evals: usize,
    tol: f64,
    n_starts: usize,
    seed: u64,
}

impl TuneProblemBuilder {
    pub fn bounds(mut self, lo: PidGains, hi: PidGains) -> Self {
        self.bounds_lo = lo;
        self.bounds_hi = hi;
        self
    }

    pub fn grid(mut self, grid: SimGrid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn max_evals(mut self, n: usize) -> Self {
        self.max_evals = n;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Number of local searches; starts beyond the first are drawn from the seeded RNG.
    pub fn n_starts(mut self, n: usize) -> Self {
        self.n_starts = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn build(self) -> Result<TuneProblem> {
        self.spec.validate()?;
        self.bounds_lo.validate()?;
        self.bounds_hi.validate()?;
        let lo = self.bounds_lo.as_array();
        let hi = self.bounds_hi.as_array();
        for (j, name) in ["kp", "ki", "kd"].iter().enumerate() {
            if !lo[j].is_finite() {
                return domain(format!("lower bound of {name} must be finite"));
            }
            if lo[j] > hi[j] {
                return domain(format!(
                    "bounds of {name} are inverted: {} > {}",
                    lo[j], hi[j]
                ));
            }
        }
        if self.max_evals == 0 {
            return domain("max_evals must be positive");
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return domain(format!("tol must be finite and > 0, got {}", self.tol));
        }
        if self.n_starts == 0 {
            return domain("n_starts must be at least 1");
        }
        if !self.plant.is_proper() {
            return Err(Error::Improper(format!(
                "plant {} is not proper",
                self.plant
            )));
        }
        if let Some(required) = self.spec.required_plant_delay() {
            let actual = self.plant.delay();
            if (required - actual).abs() > 1e-12 * required.abs().max(1.0) {
                return domain(format!(
                    "target delay {required} must equal the plant delay {actual}"
                ));
            }
        }
        if self.plant.delay() == 0.0 {
            let probe =
                PidGains::from_array(std::array::from_fn(|j| if hi[j] > 0.0 { 1.0 } else { 0.0 }));
            pid_tf(&probe)?
                .series(&self.plant)
                .feedback_unity()
                .map_err(|_| {
                    Error::Improper(format!(
                        "controller structure allowed by the bounds cannot be paired with plant {}",
                        self.plant
                    ))
                })?;
        }

        let predicted = self.spec.predicted_settling_time()?;
        if let DesiredSpec::Fotd { tcl, delay } = self.spec {
            let (rough, shifted) = fotd_settling_estimates(tcl, delay);
            log::info!("target settling estimates: 4*tcl = {rough} s, delay + 4*tcl = {shifted} s");
        }
        let grid = match self.grid {
            Some(g) => g,
            None => match &self.spec {
                DesiredSpec::Trajectory(series) => {
                    SimGrid::new(series.grid().t_final(), DEFAULT_SAMPLES)?
                }
                _ => SimGrid::new(HORIZON_FACTOR * predicted, DEFAULT_SAMPLES)?,
            },
        };
        if grid.t_final() < predicted {
            return domain(format!(
                "horizon {} s is shorter than the target's predicted settling time {predicted} s",
                grid.t_final()
            ));
        }
        if grid.t_final() < 2.0 * predicted {
            log::warn!(
                "horizon {} s is less than twice the target's predicted settling time {predicted} s",
                grid.t_final()
            );
        }
        let grid = grid.aligned_to_delay(self.plant.delay());
        let desired = desired_response(&self.spec, &grid)?;

        Ok(TuneProblem {
            plant: self.plant,
            spec: self.spec,
            bounds_lo: self.bounds_lo,
            bounds_hi: self.bounds_hi,
            grid,
            max_evals: self.max_evals,
            tol: self.tol,
            n_starts: self.n_starts,
            seed: self.seed,
            desired,
        })
    }
}

impl TuneProblem {
    /// Starts a problem with bounds `[0, +inf)`, 3000 evaluations, tol 1e-8,
    /// one start, seed 0 and a horizon of four predicted settling times.
    pub fn builder(plant: TransferFunction, spec: DesiredSpec) -> TuneProblemBuilder {
        TuneProblemBuilder {
            plant,
            spec,
            bounds_lo: PidGains::ZERO,
            bounds_hi: PidGains {
                kp: f64::INFINITY,
                ki: f64::INFINITY,
                kd: f64::INFINITY,
            },
            grid: None,
            max_evals: DEFAULT_MAX_EVALS,
            tol: DEFAULT_TOL,
            n_starts: 1,
            seed: 0,
        }
    }

    pub fn plant(&self) -> &TransferFunction {
        &self.plant
    }

    pub fn spec(&self) -> &DesiredSpec {
        &self.spec
    }

    pub fn bounds_lo(&self) -> PidGains {
        self.bounds_lo
    }

    pub fn bounds_hi(&self) -> PidGains {
        self.bounds_hi
    }

    /// Simulation grid, aligned to the plant's dead time.
    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    pub fn max_evals(&self) -> usize {
        self.max_evals
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn n_starts(&self) -> usize {
        self.n_starts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Desired response on [`TuneProblem::grid`].
    pub fn desired(&self) -> &TimeSeries {
        &self.desired
    }

    fn capped_hi(&self) -> [f64; 3] {
        self.bounds_hi.as_array().map(|h| h.min(GAIN_CAP))
    }

    fn sample(&self, x: &[f64; 3]) -> Sample {
        let gains = PidGains::from_array(*x);
        match simulate_closed_loop(&self.plant, &gains, &self.grid) {
            Ok(y) if !y.is_diverged() => {
                let r: Vec<f64> = self
                    .desired
                    .values()
                    .iter()
                    .zip(y.values())
                    .map(|(d, v)| d - v)
                    .collect();
                let value = optimizer::norm(&r);
                if value.is_finite() && value < PENALTY_FLOOR {
                    Sample::Residuals(r)
                } else {
                    Sample::Penalty(divergence_penalty(y.max_abs_finite()))
                }
            }
            Ok(y) => Sample::Penalty(divergence_penalty(y.max_abs_finite())),
            Err(_) => Sample::Penalty(divergence_penalty(f64::MAX)),
        }
    }
}

/// Discrete 2-norm of `desired - achieved` over the grid samples, or the
/// divergence penalty when the loop blows up.
pub fn l2_objective(problem: &TuneProblem, gains: &PidGains) -> Result<f64> {
    gains.validate()?;
    let lo = problem.bounds_lo.as_array();
    let hi = problem.bounds_hi.as_array();
    let x = gains.as_array();
    if (0..3).any(|j| x[j] < lo[j] || x[j] > hi[j]) {
        return domain(format!("gains {gains} lie outside the bounds"));
    }
    Ok(problem.sample(&x).value())
}

/// Outcome of [`tune`] or [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub gains: PidGains,
    /// 2-norm of the sampled error (or the divergence penalty).
    pub objective: f64,
    pub evals_used: usize,
    /// The search stopped on its tolerance rather than on the budget.
    pub converged: bool,
    pub status: TuneStatus,
    pub metrics: MetricsReport,
    pub response: TimeSeries,
    pub desired: TimeSeries,
}

/// Fits PID gains to the problem's desired response.
///
/// The first local search starts from zero gains; further starts are
/// log-uniform draws inside the bounds from a ChaCha8 generator seeded with
/// the problem's seed. Each start gets the full evaluation budget. An
/// unstable best loop is still returned, flagged [`TuneStatus::Unstable`].
pub fn tune(problem: &TuneProblem) -> Result<TuneResult> {
    let settings = Settings {
        lo: problem.bounds_lo.as_array(),
        hi: problem.capped_hi(),
        max_evals: problem.max_evals,
        tol: problem.tol,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut best: Option<optimizer::Outcome> = None;
    let mut evals = 0;
    for start in 0..problem.n_starts {
        let x0 = if start == 0 {
            settings.lo
        } else {
            random_start(&mut rng, &settings)
        };
        let outcome = minimize(|x| problem.sample(x), x0, &settings);
        log::debug!(
            "start {start}: x = {:?}, objective = {}, evals = {}",
            outcome.x,
            outcome.value,
            outcome.evals
        );
        evals += outcome.evals;
        if best.as_ref().is_none_or(|b| outcome.value < b.value) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one start");
    let mut result = evaluate(problem, &PidGains::from_array(best.x))?;
    result.evals_used = evals;
    result.converged = best.converged;
    Ok(result)
}

fn random_start(rng: &mut ChaCha8Rng, s: &Settings) -> [f64; 3] {
    std::array::from_fn(|j| {
        if s.lo[j] >= s.hi[j] {
            return s.lo[j];
        }
        let lo = s.lo[j].max(1e-3);
        let hi = s.hi[j].min(1e2).max(lo);
        let u: f64 = rng.random();
        (lo.ln() + u * (hi.ln() - lo.ln()))
            .exp()
            .clamp(s.lo[j], s.hi[j])
    })
}

/// Simulates and scores the given gains without optimizing.
pub fn evaluate(problem: &TuneProblem, gains: &PidGains) -> Result<TuneResult> {
    gains.validate()?;
    let objective = problem.sample(&gains.as_array()).value();
    let response = simulate_closed_loop(&problem.plant, gains, &problem.grid)?;
    let metrics = check_stability_and_report(&problem.plant, gains, &response)?;
    Ok(TuneResult {
        gains: *gains,
        objective,
        evals_used: 1,
        converged: true,
        status: if metrics.stable {
            TuneStatus::Stable
        } else {
            TuneStatus::Unstable
        },
        metrics,
        response,
        desired: problem.desired.clone(),
    })
}

/// Stability verdict and performance figures of the loop `pid(gains)·plant`.
///
/// The final value comes from the loop's DC gain, delay-free loops are
/// judged by their poles and delayed loops by the simulated `response`.
/// Ms is taken over the open loop including its dead time.
pub fn check_stability_and_report(
    plant: &TransferFunction,
    gains: &PidGains,
    response: &TimeSeries,
) -> Result<MetricsReport> {
    let loop_tf = pid_tf(gains)?.series(plant);
    let final_value = closed_loop_final_value(&loop_tf);
    let stable = match (plant.delay() == 0.0, final_value) {
        (true, _) => is_stable(StabilityEvidence::Rational(&loop_tf.feedback_unity()?)),
        (false, Some(fv)) => is_stable(StabilityEvidence::Simulated {
            response,
            final_value: fv,
        }),
        (false, None) => false,
    };
    let final_value = final_value.unwrap_or(f64::NAN);
    let settling_time = if stable && final_value != 0.0 {
        settling_time_2pct(response, final_value).ok()
    } else {
        None
    };
    let iae_value = if response.is_diverged() {
        f64::INFINITY
    } else {
        iae(response, 1.0)
    };
    let peak = max_sensitivity_default(&loop_tf)?;
    Ok(MetricsReport {
        settling_time,
        overshoot_pct: percent_overshoot(response, final_value),
        iae: iae_value,
        ms: peak.ms,
        ms_omega: peak.omega,
        decay_ratio: decay_ratio(response, final_value),
        stable,
        final_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::make_fotd;

    fn third_order() -> TransferFunction {
        TransferFunction::from_coeffs(&[1.0], &[1.0, 3.0, 3.0, 1.0]).unwrap()
    }

    fn pi_bounds() -> (PidGains, PidGains) {
        (
            PidGains::ZERO,
            PidGains::new(f64::INFINITY, f64::INFINITY, 0.0).unwrap(),
        )
    }

    fn high_order_problem() -> TuneProblem {
        let (lo, hi) = pi_bounds();
        let target = TransferFunction::from_coeffs(&[1.0], &[3.0, 1.0]).unwrap();
        TuneProblem::builder(third_order(), DesiredSpec::Custom(target))
            .bounds(lo, hi)
            .grid(SimGrid::new(40.0, 2000).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn defaults() {
        let p = TuneProblem::builder(
            third_order(),
            DesiredSpec::SecondOrder { po: 0.0, ts: 10.0 },
        )
        .build()
        .unwrap();
        assert_eq!(p.max_evals(), 3000);
        assert_eq!(p.tol(), 1e-8);
        assert_eq!(p.grid().n_samples(), 2000);
        assert_eq!(p.grid().t_final(), 40.0);
        assert_eq!(p.bounds_lo(), PidGains::ZERO);
        assert!(p.bounds_hi().kp.is_infinite());
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let spec = DesiredSpec::SecondOrder { po: 0.0, ts: 10.0 };
        let inverted = TuneProblem::builder(third_order(), spec.clone())
            .bounds(
                PidGains::new(2.0, 0.0, 0.0).unwrap(),
                PidGains::new(1.0, 1.0, 1.0).unwrap(),
            )
            .build();
        assert!(matches!(inverted, Err(Error::Domain(_))));

        let short = TuneProblem::builder(third_order(), spec)
            .grid(SimGrid::new(5.0, 2000).unwrap())
            .build();
        assert!(matches!(short, Err(Error::Domain(_))));

        let plant = TransferFunction::from_coeffs(&[1.0], &[1.0, 1.0])
            .unwrap()
            .with_delay(1.0)
            .unwrap();
        let wrong_delay = TuneProblem::builder(
            plant,
            DesiredSpec::Fotd {
                tcl: 2.0,
                delay: 0.5,
            },
        )
        .build();
        assert!(matches!(wrong_delay, Err(Error::Domain(_))));

        let differentiator = TransferFunction::from_coeffs(&[1.0, 0.0], &[1.0]).unwrap();
        let improper = TuneProblem::builder(
            differentiator,
            DesiredSpec::SecondOrder { po: 0.0, ts: 10.0 },
        )
        .build();
        assert!(matches!(improper, Err(Error::Improper(_))));
    }

    #[test]
    fn objective_examples() {
        let p = high_order_problem();
        let desired_norm = optimizer::norm(p.desired().values());
        assert_eq!(l2_objective(&p, &PidGains::ZERO).unwrap(), desired_norm);

        let a = l2_objective(&p, &PidGains::pi(0.9248, 0.2829).unwrap()).unwrap();
        let b = l2_objective(&p, &PidGains::pi(0.9242, 0.2828).unwrap()).unwrap();
        assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");

        assert!(l2_objective(&p, &PidGains::new(1.0, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn matching_target_has_zero_objective() {
        // C = 1/s on 1/(s+1) closes to 1/(s² + s + 1)
        let plant = TransferFunction::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap();
        let target = TransferFunction::from_coeffs(&[1.0], &[1.0, 1.0, 1.0]).unwrap();
        let p = TuneProblem::builder(plant, DesiredSpec::Custom(target))
            .grid(SimGrid::new(40.0, 2000).unwrap())
            .build()
            .unwrap();
        assert!(l2_objective(&p, &PidGains::new(0.0, 1.0, 0.0).unwrap()).unwrap() < 1e-9);
    }

    #[test]
    fn penalty_grows_with_divergence() {
        let mut prev = divergence_penalty(0.0);
        assert_eq!(prev, PENALTY_FLOOR);
        for k in 1..300 {
            let p = divergence_penalty(10f64.powi(k));
            assert!(p >= prev && p.is_finite());
            prev = p;
        }
        assert!(divergence_penalty(f64::MAX).is_finite());

        let p = TuneProblem::builder(
            third_order(),
            DesiredSpec::SecondOrder { po: 0.0, ts: 10.0 },
        )
        .build()
        .unwrap();
        let wild = l2_objective(&p, &PidGains::new(1000.0, 0.0, 0.0).unwrap()).unwrap();
        assert!(wild >= PENALTY_FLOOR && wild.is_finite());
    }

    #[test]
    fn ultimate_gain_separates_stable_from_unstable() {
        let p = TuneProblem::builder(
            third_order(),
            DesiredSpec::SecondOrder { po: 0.0, ts: 10.0 },
        )
        .build()
        .unwrap();
        let unstable = evaluate(&p, &PidGains::new(1000.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(unstable.status, TuneStatus::Unstable);
        assert!(!unstable.metrics.stable);
        assert_eq!(unstable.metrics.settling_time, None);

        let stable = evaluate(&p, &PidGains::new(4.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(stable.status, TuneStatus::Stable);
        assert_eq!(stable.metrics.final_value, 0.8);
    }

    #[test]
    fn zero_gains_leave_the_loop_at_rest() {
        let p = high_order_problem();
        let r = evaluate(&p, &PidGains::ZERO).unwrap();
        assert!(r.metrics.stable);
        assert_eq!(r.metrics.overshoot_pct, 0.0);
        assert!(r.response.values().iter().all(|v| *v == 0.0));
        assert_eq!(r.objective, optimizer::norm(p.desired().values()));
    }

    #[test]
    fn tuned_result_is_feasible_and_consistent() {
        let p = high_order_problem();
        let r = tune(&p).unwrap();
        assert_eq!(r.gains.kd, 0.0);
        assert!(r.gains.kp >= 0.0 && r.gains.ki >= 0.0);
        assert!(r.evals_used <= 3000);
        let again = l2_objective(&p, &r.gains).unwrap();
        assert!((again - r.objective).abs() <= 1e-10);
        assert!(r.objective < l2_objective(&p, &PidGains::ZERO).unwrap());
    }

    #[test]
    fn tuning_is_deterministic() {
        let plant = TransferFunction::from_coeffs(&[1.0], &[1.0, 1.0])
            .unwrap()
            .with_delay(1.0)
            .unwrap();
        let build = || {
            let (lo, hi) = pi_bounds();
            TuneProblem::builder(
                plant.clone(),
                DesiredSpec::Fotd {
                    tcl: 2.0,
                    delay: 1.0,
                },
            )
            .bounds(lo, hi)
            .grid(SimGrid::new(25.0, 500).unwrap())
            .n_starts(3)
            .seed(7)
            .build()
            .unwrap()
        };
        let a = tune(&build()).unwrap();
        let b = tune(&build()).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.gains.kd, 0.0);
    }

    #[test]
    fn delayed_target_lines_up_with_the_plant_grid() {
        let plant = TransferFunction::from_coeffs(&[1.0], &[1.0, 1.0])
            .unwrap()
            .with_delay(1.0)
            .unwrap();
        let p = TuneProblem::builder(
            plant,
            DesiredSpec::Fotd {
                tcl: 2.0,
                delay: 1.0,
            },
        )
        .grid(SimGrid::new(25.0, 2000).unwrap())
        .build()
        .unwrap();
        assert!(p.grid().delay_samples(1.0).is_some());
        assert_eq!(p.desired().len(), p.grid().n_samples());
        let direct = crate::lti::step_response(&make_fotd(2.0, 1.0).unwrap(), p.grid()).unwrap();
        assert_eq!(direct.values(), p.desired().values());
    }
}
