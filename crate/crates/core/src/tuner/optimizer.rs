//! Projected Levenberg-Marquardt for box-constrained least squares in three variables.

use nalgebra::{Matrix3, Vector3};

/// Result of one objective evaluation.
#[derive(Debug, Clone)]
pub(crate) enum Sample {
    /// Residual vector; the objective is its 2-norm.
    Residuals(Vec<f64>),
    /// Candidate rejected by a penalty value (no residuals available).
    Penalty(f64),
}

impl Sample {
    pub(crate) fn value(&self) -> f64 {
        match self {
            Sample::Residuals(r) => norm(r),
            Sample::Penalty(p) => *p,
        }
    }
}

pub(crate) fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: [f64; 3],
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

pub(crate) struct Settings {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub max_evals: usize,
    pub tol: f64,
}

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

fn project(x: [f64; 3], s: &Settings) -> [f64; 3] {
    std::array::from_fn(|j| x[j].clamp(s.lo[j], s.hi[j]))
}

fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-8)
}

struct Counter<F> {
    f: F,
    evals: usize,
    max: usize,
}

impl<F: FnMut(&[f64; 3]) -> Sample> Counter<F> {
    fn eval(&mut self, x: &[f64; 3]) -> Option<Sample> {
        if self.evals >= self.max {
            return None;
        }
        self.evals += 1;
        Some((self.f)(x))
    }
}

/// Minimizes `‖r(x)‖₂` over the box `[lo, hi]` starting from `x0`.
///
/// Jacobians use one-sided finite differences that stay inside the box.
/// Variables at a bound whose gradient points outward are frozen for the
/// step. Stops when both the step and the objective decrease fall below
/// `tol` (relative), or when the evaluation budget is spent.
pub(crate) fn minimize<F>(f: F, x0: [f64; 3], settings: &Settings) -> Outcome
where
    F: FnMut(&[f64; 3]) -> Sample,
{
    let mut counter = Counter {
        f,
        evals: 0,
        max: settings.max_evals,
    };
    let mut x = project(x0, settings);
    let Some(first) = counter.eval(&x) else {
        return Outcome {
            x,
            value: f64::INFINITY,
            evals: 0,
            converged: false,
        };
    };
    let mut value = first.value();
    let Sample::Residuals(mut r) = first else {
        return Outcome {
            x,
            value,
            evals: counter.evals,
            converged: false,
        };
    };
    let mut lambda = LAMBDA_START;

    while let Some(jac) = jacobian(&mut counter, &x, &r, settings) {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (i, ri) in r.iter().enumerate() {
            let row = Vector3::new(jac[0][i], jac[1][i], jac[2][i]);
            jtj += row * row.transpose();
            jtr += row * *ri;
        }
        // Gradient of ½‖r‖² is -Jᵀr because r = desired - achieved.
        let grad = -jtr;
        let free: [bool; 3] = std::array::from_fn(|j| {
            let at_lo = x[j] <= settings.lo[j] && grad[j] > 0.0;
            let at_hi = x[j] >= settings.hi[j] && grad[j] < 0.0;
            settings.lo[j] < settings.hi[j] && !at_lo && !at_hi
        });
        if !free.iter().any(|f| *f) {
            return Outcome {
                x,
                value,
                evals: counter.evals,
                converged: true,
            };
        }
        let diag_floor = 1e-12 * jtj.diagonal().max().max(1e-300);

        loop {
            let mut a = Matrix3::<f64>::identity();
            let mut b = Vector3::<f64>::zeros();
            for i in 0..3 {
                if !free[i] {
                    continue;
                }
                b[i] = -grad[i];
                for k in 0..3 {
                    if free[k] {
                        a[(i, k)] = jtj[(i, k)];
                    }
                }
                a[(i, i)] = jtj[(i, i)] + lambda * jtj[(i, i)].max(diag_floor);
            }
            let step = a.cholesky().map(|c| c.solve(&b)).unwrap_or_else(|| {
                let scale = lambda * jtj.diagonal().max().max(1.0);
                b / scale
            });
            let trial = project(std::array::from_fn(|j| x[j] + step[j]), settings);
            let moved = norm(&std::array::from_fn::<f64, 3, _>(|j| trial[j] - x[j]));
            if moved == 0.0 {
                lambda *= 4.0;
                if lambda > LAMBDA_MAX {
                    return Outcome {
                        x,
                        value,
                        evals: counter.evals,
                        converged: true,
                    };
                }
                continue;
            }
            let Some(sample) = counter.eval(&trial) else {
                return Outcome {
                    x,
                    value,
                    evals: counter.evals,
                    converged: false,
                };
            };
            let trial_value = sample.value();
            match sample {
                Sample::Residuals(trial_r) if trial_value < value => {
                    let gain = value - trial_value;
                    let scale = norm(&x).max(1.0);
                    let small_step = moved <= settings.tol * scale;
                    let small_gain = gain <= settings.tol * value.max(1.0);
                    x = trial;
                    r = trial_r;
                    value = trial_value;
                    lambda = (lambda / 3.0).max(1e-12);
                    if small_step && small_gain {
                        return Outcome {
                            x,
                            value,
                            evals: counter.evals,
                            converged: true,
                        };
                    }
                    break;
                }
                _ => {
                    lambda *= 4.0;
                    if lambda > LAMBDA_MAX {
                        return Outcome {
                            x,
                            value,
                            evals: counter.evals,
                            converged: true,
                        };
                    }
                }
            }
        }
    }
    Outcome {
        x,
        value,
        evals: counter.evals,
        converged: false,
    }
}

/// Columns `∂(achieved)/∂x_j = -∂r/∂x_j`; fixed or penalized directions get zero columns.
fn jacobian<F: FnMut(&[f64; 3]) -> Sample>(
    counter: &mut Counter<F>,
    x: &[f64; 3],
    r: &[f64],
    s: &Settings,
) -> Option<[Vec<f64>; 3]> {
    let mut cols: [Vec<f64>; 3] = Default::default();
    for j in 0..3 {
        if s.lo[j] >= s.hi[j] {
            cols[j] = vec![0.0; r.len()];
            continue;
        }
        let h = fd_step(x[j]);
        let signed = if x[j] + h <= s.hi[j] {
            h
        } else {
            -h.min(x[j] - s.lo[j])
        };
        let mut probe = *x;
        probe[j] += signed;
        let col = match counter.eval(&probe)? {
            Sample::Residuals(rp) => {
                let dx = probe[j] - x[j];
                rp.iter().zip(r).map(|(p, c)| (c - p) / dx).collect()
            }
            Sample::Penalty(_) => vec![0.0; r.len()],
        };
        cols[j] = col;
    }
    Some(cols)
}
