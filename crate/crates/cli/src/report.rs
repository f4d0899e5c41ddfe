//! JSON reports and comparison tables.

use serde::{Deserialize, Serialize};

use pidfit::tuner::{TuneResult, TuneStatus};
use pidfit::{MetricsReport, PidGains, SimGrid};

use crate::config::RunConfig;
use crate::output::{cell, quote};

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsOut {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl From<PidGains> for GainsOut {
    fn from(g: PidGains) -> Self {
        Self {
            kp: g.kp,
            ki: g.ki,
            kd: g.kd,
        }
    }
}

/// Metrics with non-finite or unavailable values as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsOut {
    pub ts: Option<f64>,
    pub po_pct: Option<f64>,
    pub iae: Option<f64>,
    pub ms: Option<f64>,
    pub ms_omega: Option<f64>,
    pub decay_ratio: Option<f64>,
    pub final_value: Option<f64>,
}

impl From<&MetricsReport> for MetricsOut {
    fn from(m: &MetricsReport) -> Self {
        Self {
            ts: m.settling_time,
            po_pct: finite(m.overshoot_pct),
            iae: finite(m.iae),
            ms: finite(m.ms),
            ms_omega: finite(m.ms_omega),
            decay_ratio: m.decay_ratio.and_then(finite),
            final_value: finite(m.final_value),
        }
    }
}

/// Effective simulation grid (after alignment to the plant's dead time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOut {
    pub t_final: f64,
    pub n_samples: usize,
}

impl From<&SimGrid> for GridOut {
    fn from(g: &SimGrid) -> Self {
        Self {
            t_final: g.t_final(),
            n_samples: g.n_samples(),
        }
    }
}

/// Output files, relative to the report's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilesOut {
    pub response_csv: Option<String>,
    pub plot_svg: Option<String>,
}

/// One tuned or evaluated loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub method: String,
    pub gains: GainsOut,
    pub metrics: MetricsOut,
    pub stable: bool,
    pub objective: Option<f64>,
    pub evals_used: usize,
    pub converged: bool,
    pub grid: GridOut,
    pub files: FilesOut,
    pub config: RunConfig,
}

impl RunReport {
    pub fn new(
        command: &str,
        method: &str,
        result: &TuneResult,
        files: FilesOut,
        config: RunConfig,
    ) -> Self {
        Self {
            command: command.into(),
            method: method.into(),
            gains: result.gains.into(),
            metrics: (&result.metrics).into(),
            stable: result.status == TuneStatus::Stable,
            objective: finite(result.objective),
            evals_used: result.evals_used,
            converged: result.converged,
            grid: result.response.grid().into(),
            files,
            config,
        }
    }
}

/// One comparison row; skipped methods carry only a reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    pub status: String,
    pub reason: Option<String>,
    pub gains: Option<GainsOut>,
    pub metrics: Option<MetricsOut>,
    pub stable: Option<bool>,
    pub objective: Option<f64>,
    pub evals_used: Option<usize>,
}

impl Row {
    pub fn ran(method: &str, result: &TuneResult) -> Self {
        Self {
            method: method.into(),
            status: "ok".into(),
            reason: None,
            gains: Some(result.gains.into()),
            metrics: Some((&result.metrics).into()),
            stable: Some(result.status == TuneStatus::Stable),
            objective: finite(result.objective),
            evals_used: Some(result.evals_used),
        }
    }

    pub fn skipped(method: &str, reason: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            status: "skipped".into(),
            reason: Some(reason.into()),
            gains: None,
            metrics: None,
            stable: None,
            objective: None,
            evals_used: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub command: String,
    pub rows: Vec<Row>,
    pub grid: GridOut,
    pub files: FilesOut,
    pub config: RunConfig,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,status,kp,ki,kd,ts,po_pct,iae,ms,stable,objective,evals_used,reason\n",
        );
        for r in &self.rows {
            let g = r.gains.as_ref();
            let m = r.metrics.as_ref();
            let fields = [
                quote(&r.method),
                quote(&r.status),
                cell(g.map(|g| g.kp)),
                cell(g.map(|g| g.ki)),
                cell(g.map(|g| g.kd)),
                cell(m.and_then(|m| m.ts)),
                cell(m.and_then(|m| m.po_pct)),
                cell(m.and_then(|m| m.iae)),
                cell(m.and_then(|m| m.ms)),
                r.stable.map(|s| s.to_string()).unwrap_or_default(),
                cell(r.objective),
                r.evals_used.map(|n| n.to_string()).unwrap_or_default(),
                quote(r.reason.as_deref().unwrap_or("")),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
