//! Run configuration: TOML in, fully defaulted echo out.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use pidfit::reference::DesiredSpec;
use pidfit::tuner::{TuneProblem, DEFAULT_MAX_EVALS, DEFAULT_TOL, HORIZON_FACTOR};
use pidfit::{PidGains, SimGrid, TimeSeries, TransferFunction};

use crate::Failure;

/// A gain bound; `"inf"` in the file stands for no upper limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound(pub f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct BoundVisitor;

        impl Visitor<'_> for BoundVisitor {
            type Value = Bound;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Bound, E> {
                Ok(Bound(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Bound, E> {
                Ok(Bound(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Bound, E> {
                Ok(Bound(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Bound, E> {
                match v {
                    "inf" | "+inf" | "infinity" => Ok(Bound(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        d.deserialize_any(BoundVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    #[serde(default)]
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSection {
    /// Either `po` and `ts`, or `zeta` and `wn`.
    SecondOrder {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        po: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wn: Option<f64>,
    },
    /// Dead time defaults to the plant's.
    Fotd {
        tcl: f64,
        #[serde(default)]
        delay: Option<f64>,
    },
    CustomTf {
        num: Vec<f64>,
        den: Vec<f64>,
        #[serde(default)]
        delay: f64,
    },
    Trajectory {
        t: Vec<f64>,
        y: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub lo: Option<[Bound; 3]>,
    pub hi: Option<[Bound; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_evals: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub n_starts: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub t_final: Option<f64>,
    pub n_samples: Option<usize>,
}

/// Contents of a config file. After [`RunConfig::resolve`] every optional
/// field except the unused second-order pair is filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSection>,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

fn config_error(path: &str, msg: impl fmt::Display) -> Failure {
    Failure::Config(format!("{path}: {msg}"))
}

fn finite(path: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(path, format!("must be finite, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<f64, Failure> {
    if finite(path, v)? > 0.0 {
        Ok(v)
    } else {
        Err(config_error(path, format!("must be > 0, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<f64, Failure> {
    if finite(path, v)? >= 0.0 {
        Ok(v)
    } else {
        Err(config_error(path, format!("must be >= 0, got {v}")))
    }
}

fn coefficients(path: &str, c: &[f64]) -> Result<(), Failure> {
    if c.is_empty() {
        return Err(config_error(path, "must list at least one coefficient"));
    }
    for (i, v) in c.iter().enumerate() {
        finite(&format!("{path}[{i}]"), *v)?;
    }
    Ok(())
}

fn transfer_function(
    path: &str,
    num: &[f64],
    den: &[f64],
    delay: f64,
) -> Result<TransferFunction, Failure> {
    coefficients(&format!("{path}.num"), num)?;
    coefficients(&format!("{path}.den"), den)?;
    non_negative(&format!("{path}.delay"), delay)?;
    TransferFunction::from_coeffs(num, den)
        .and_then(|tf| tf.with_delay(delay))
        .map_err(|e| config_error(path, e))
}

/// Reads and parses a TOML config; unknown keys are rejected.
pub fn parse_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, Failure> {
    toml::from_str(text).map_err(|e| Failure::Config(e.to_string().trim_end().to_string()))
}

/// Model objects built from a resolved config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub plant: TransferFunction,
    pub spec: Option<DesiredSpec>,
    pub lo: PidGains,
    pub hi: PidGains,
    pub grid: SimGrid,
}

impl RunConfig {
    /// Validates every field, fills defaults and builds the model objects.
    ///
    /// `open_loop_horizon` supplies the horizon when there is neither a
    /// target nor an explicit `simulation.t_final`.
    pub fn resolve(
        &self,
        open_loop_horizon: impl Fn(&TransferFunction) -> Option<f64>,
    ) -> Result<Resolved, Failure> {
        let mut config = self.clone();
        let plant = transfer_function("plant", &self.plant.num, &self.plant.den, self.plant.delay)?;

        let spec = match &self.target {
            None => None,
            Some(target) => {
                let (spec, echoed) = resolve_target(target, plant.delay())?;
                config.target = Some(echoed);
                Some(spec)
            }
        };

        let bound = |path: &str, b: Bound, allow_inf: bool| -> Result<f64, Failure> {
            if allow_inf && b.0 == f64::INFINITY {
                return Ok(b.0);
            }
            non_negative(path, b.0)
        };
        let lo = self.controller.lo.unwrap_or([Bound(0.0); 3]);
        let hi = self.controller.hi.unwrap_or([Bound(f64::INFINITY); 3]);
        let mut lo_v = [0.0; 3];
        let mut hi_v = [0.0; 3];
        for (j, name) in ["kp", "ki", "kd"].iter().enumerate() {
            lo_v[j] = bound(&format!("controller.lo[{j}]"), lo[j], false)?;
            hi_v[j] = bound(&format!("controller.hi[{j}]"), hi[j], true)?;
            if lo_v[j] > hi_v[j] {
                return Err(config_error(
                    &format!("controller.hi[{j}]"),
                    format!("upper bound of {name} is below its lower bound"),
                ));
            }
        }
        config.controller = ControllerSection {
            lo: Some(lo),
            hi: Some(hi),
        };

        let max_evals = self.optimizer.max_evals.unwrap_or(DEFAULT_MAX_EVALS);
        if max_evals == 0 {
            return Err(config_error("optimizer.max_evals", "must be positive"));
        }
        let tol = positive("optimizer.tol", self.optimizer.tol.unwrap_or(DEFAULT_TOL))?;
        let n_starts = self.optimizer.n_starts.unwrap_or(1);
        if n_starts == 0 {
            return Err(config_error("optimizer.n_starts", "must be at least 1"));
        }
        config.optimizer = OptimizerSection {
            max_evals: Some(max_evals),
            tol: Some(tol),
            seed: Some(self.optimizer.seed.unwrap_or(0)),
            n_starts: Some(n_starts),
        };

        let n_samples = self
            .simulation
            .n_samples
            .unwrap_or(pidfit::lti::DEFAULT_SAMPLES);
        if n_samples < 2 {
            return Err(config_error("simulation.n_samples", "must be at least 2"));
        }
        let t_final = match self.simulation.t_final {
            Some(t) => positive("simulation.t_final", t)?,
            None => match &spec {
                Some(DesiredSpec::Trajectory(series)) => series.grid().t_final(),
                Some(spec) => {
                    HORIZON_FACTOR
                        * spec
                            .predicted_settling_time()
                            .map_err(|e| config_error("target", e))?
                }
                None => open_loop_horizon(&plant).ok_or_else(|| {
                    config_error(
                        "simulation.t_final",
                        "required when the plant has no stable pole",
                    )
                })?,
            },
        };
        config.simulation = SimulationSection {
            t_final: Some(t_final),
            n_samples: Some(n_samples),
        };
        let grid = SimGrid::new(t_final, n_samples).map_err(|e| config_error("simulation", e))?;

        Ok(Resolved {
            config,
            plant,
            spec,
            lo: PidGains::from_array(lo_v),
            hi: PidGains::from_array(hi_v),
            grid,
        })
    }
}

fn resolve_target(
    target: &TargetSection,
    plant_delay: f64,
) -> Result<(DesiredSpec, TargetSection), Failure> {
    let spec = match target {
        TargetSection::SecondOrder { po, ts, zeta, wn } => match (po, ts, zeta, wn) {
            (Some(po), Some(ts), None, None) => {
                let po = non_negative("target.po", *po)?;
                if po >= 100.0 {
                    return Err(config_error(
                        "target.po",
                        format!("must be < 100, got {po}"),
                    ));
                }
                DesiredSpec::SecondOrder {
                    po,
                    ts: positive("target.ts", *ts)?,
                }
            }
            (None, None, Some(zeta), Some(wn)) => {
                let zeta = positive("target.zeta", *zeta)?;
                if zeta > 1.0 {
                    return Err(config_error(
                        "target.zeta",
                        format!("must be <= 1, got {zeta}"),
                    ));
                }
                DesiredSpec::ZetaOmega {
                    zeta,
                    wn: positive("target.wn", *wn)?,
                }
            }
            _ => {
                return Err(config_error(
                    "target",
                    "second_order needs exactly one of the pairs (po, ts) or (zeta, wn)",
                ))
            }
        },
        TargetSection::Fotd { tcl, delay } => {
            let delay = non_negative("target.delay", delay.unwrap_or(plant_delay))?;
            if delay != plant_delay {
                return Err(config_error(
                    "target.delay",
                    format!("must equal plant.delay ({plant_delay}), got {delay}"),
                ));
            }
            DesiredSpec::Fotd {
                tcl: positive("target.tcl", *tcl)?,
                delay,
            }
        }
        TargetSection::CustomTf { num, den, delay } => {
            let tf = transfer_function("target", num, den, *delay)?;
            if !tf.is_proper() {
                return Err(config_error("target", "custom_tf must be proper"));
            }
            DesiredSpec::Custom(tf)
        }
        TargetSection::Trajectory { t, y } => {
            if t.len() != y.len() || t.len() < 2 {
                return Err(config_error(
                    "target",
                    "trajectory needs equally long t and y with at least 2 points",
                ));
            }
            for (i, v) in t.iter().chain(y.iter()).enumerate() {
                finite(
                    &format!(
                        "target.{}[{}]",
                        if i < t.len() { "t" } else { "y" },
                        i % t.len()
                    ),
                    *v,
                )?;
            }
            if t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_error(
                    "target.t",
                    "must start at 0 and increase strictly",
                ));
            }
            let grid =
                SimGrid::new(t[t.len() - 1], t.len()).map_err(|e| config_error("target.t", e))?;
            let series =
                TimeSeries::from_samples(t, y, grid).map_err(|e| config_error("target", e))?;
            DesiredSpec::Trajectory(series)
        }
    };
    let mut echoed = target.clone();
    if let TargetSection::Fotd { delay, .. } = &mut echoed {
        *delay = Some(plant_delay);
    }
    Ok((spec, echoed))
}

impl Resolved {
    /// Tuning problem over the configured grid; missing targets and invalid
    /// combinations are config errors, improper pairings structural ones.
    pub fn problem(&self, seed_override: Option<u64>) -> Result<TuneProblem, Failure> {
        let spec = self
            .spec
            .clone()
            .ok_or_else(|| Failure::Config("target: missing section".into()))?;
        let opt = &self.config.optimizer;
        TuneProblem::builder(self.plant.clone(), spec)
            .bounds(self.lo, self.hi)
            .grid(self.grid)
            .max_evals(opt.max_evals.unwrap_or(DEFAULT_MAX_EVALS))
            .tol(opt.tol.unwrap_or(DEFAULT_TOL))
            .n_starts(opt.n_starts.unwrap_or(1))
            .seed(seed_override.or(opt.seed).unwrap_or(0))
            .build()
            .map_err(|e| match e {
                pidfit::Error::Improper(_) => Failure::Numeric(e.to_string()),
                other => Failure::Config(format!("problem: {other}")),
            })
    }
}
