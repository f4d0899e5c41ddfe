//! `pidfit`: tune, compare, evaluate and simulate PID loops from a TOML config.
//!
//! Exit codes: 0 success, 2 unstable result, 3 config error, 4 numeric or
//! structural failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use pidfit::baselines::{
    fotd_parameters, lambda_pi, pole_placement_pi_first_order, reaction_curve, reaction_grid,
    ultimate_point, zn_reaction_pid, zn_ultimate, Structure,
};
use pidfit::reference::DesiredSpec;
use pidfit::tuner::{evaluate, tune, TuneProblem, TuneResult, TuneStatus};
use pidfit::{simulate_closed_loop, step_response, PidGains, TimeSeries, TransferFunction};

use pidfit_cli::config::{parse_config, Resolved};
use pidfit_cli::report::{self, FilesOut, Row, RunReport, Table};
use pidfit_cli::{output, svg, Failure};

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Numeric(format!("cannot write {}: {e}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "pidfit",
    version,
    about = "Fit PID gains to a desired closed-loop step response"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit gains to the target and write report.json, response.csv and plot.svg.
    Tune(Args),
    /// Run several tuning methods and write table.json, table.csv and plot.svg.
    Compare(Args),
    /// Write response.csv for the open-loop plant, or the closed loop with --gains.
    Simulate(Args),
    /// Score fixed --gains against the target like `tune` does.
    Evaluate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML problem description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Fixed gains as kp,ki,kd.
    #[arg(long, value_parser = parse_gains)]
    gains: Option<PidGains>,
    /// Methods for `compare`, comma separated.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Overrides optimizer.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Srcf,
    ZnReaction,
    ZnUltimate,
    Lambda,
    PolePlacement,
}

impl Method {
    const ALL: [Method; 5] = [
        Method::Srcf,
        Method::ZnReaction,
        Method::ZnUltimate,
        Method::Lambda,
        Method::PolePlacement,
    ];

    fn name(self) -> &'static str {
        match self {
            Method::Srcf => "srcf",
            Method::ZnReaction => "zn-reaction",
            Method::ZnUltimate => "zn-ultimate",
            Method::Lambda => "lambda",
            Method::PolePlacement => "pole-placement",
        }
    }
}

fn parse_gains(s: &str) -> Result<PidGains, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected kp,ki,kd, got {s:?}"));
    }
    let mut v = [0.0f64; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
        if !slot.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    PidGains::new(v[0], v[1], v[2]).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let outcome = match cli.command {
        Command::Tune(args) => cmd_tune(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("pidfit: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn open_loop_horizon(plant: &TransferFunction) -> Option<f64> {
    reaction_grid(plant).ok().map(|g| g.t_final())
}

fn load(args: &Args) -> Result<Resolved, Failure> {
    let mut resolved = parse_config(&args.config)?.resolve(open_loop_horizon)?;
    if let Some(seed) = args.seed {
        resolved.config.optimizer.seed = Some(seed);
    }
    Ok(resolved)
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))
}

fn write_traces(
    dir: &Path,
    name: &str,
    columns: &[&str],
    series: &[&TimeSeries],
) -> Result<(), Failure> {
    let path = dir.join(name);
    output::write_traces(&path, columns, series).map_err(|e| io_failure(&path, e))
}

fn write_plot(dir: &Path, title: &str, traces: &[(&str, &TimeSeries)]) -> Result<(), Failure> {
    let svg = svg::emit_svg(title, traces).map_err(Failure::Numeric)?;
    write(dir, "plot.svg", &svg)
}

fn single_run(
    args: &Args,
    command: &str,
    method: &str,
    run: impl Fn(&TuneProblem) -> Result<TuneResult, Failure>,
) -> Result<u8, Failure> {
    let resolved = load(args)?;
    let problem = resolved.problem(args.seed)?;
    let result = run(&problem)?;
    prepare_out(&args.out)?;
    write_traces(
        &args.out,
        "response.csv",
        &["y_desired", "y_actual"],
        &[&result.desired, &result.response],
    )?;
    write_plot(
        &args.out,
        &format!("Step response: desired vs {method}"),
        &[("desired", &result.desired), (method, &result.response)],
    )?;
    let files = FilesOut {
        response_csv: Some("response.csv".into()),
        plot_svg: Some("plot.svg".into()),
    };
    let report = RunReport::new(command, method, &result, files, resolved.config);
    write(&args.out, "report.json", &report::to_json(&report))?;
    print_summary(&[Row::ran(method, &result)]);
    Ok(match result.status {
        TuneStatus::Stable => 0,
        TuneStatus::Unstable => 2,
    })
}

fn cmd_tune(args: &Args) -> Result<u8, Failure> {
    single_run(args, "tune", "srcf", |p| Ok(tune(p)?))
}

fn cmd_evaluate(args: &Args) -> Result<u8, Failure> {
    let gains = args
        .gains
        .ok_or_else(|| Failure::Config("--gains kp,ki,kd is required for evaluate".into()))?;
    single_run(args, "evaluate", "evaluated", |p| Ok(evaluate(p, &gains)?))
}

fn cmd_simulate(args: &Args) -> Result<u8, Failure> {
    let resolved = load(args)?;
    let y = match &args.gains {
        None => step_response(&resolved.plant, &resolved.grid)?,
        Some(g) => simulate_closed_loop(&resolved.plant, g, &resolved.grid)?,
    };
    prepare_out(&args.out)?;
    write_traces(&args.out, "response.csv", &["y"], &[&y])?;
    let state = if y.is_diverged() {
        "diverged"
    } else {
        "finite"
    };
    println!(
        "simulated {} samples over {} s ({state}); y(end) = {}",
        y.len(),
        y.grid().t_final(),
        output::format_g(y.last(), 9)
    );
    Ok(0)
}

fn baseline(method: Method, problem: &TuneProblem) -> Result<PidGains, String> {
    let plant = problem.plant();
    match method {
        Method::Srcf => unreachable!("srcf is tuned, not a baseline"),
        Method::ZnReaction => {
            let grid = reaction_grid(plant).map_err(|e| e.to_string())?;
            let rc = reaction_curve(plant, &grid).map_err(|e| e.to_string())?;
            Ok(zn_reaction_pid(&rc))
        }
        Method::ZnUltimate => {
            let up = ultimate_point(plant).map_err(|e| e.to_string())?;
            let hi = problem.bounds_hi();
            let structure = match (hi.ki > 0.0, hi.kd > 0.0) {
                (_, true) => Structure::Pid,
                (true, false) => Structure::Pi,
                (false, false) => Structure::P,
            };
            Ok(zn_ultimate(&up, structure))
        }
        Method::Lambda => {
            let (k, t, l) = fotd_parameters(plant).ok_or("plant is not first-order-plus-delay")?;
            let tcl = match problem.spec() {
                DesiredSpec::Fotd { tcl, .. } => *tcl,
                _ => 2.0 * t,
            };
            lambda_pi(k, t, l, tcl).map_err(|e| e.to_string())
        }
        Method::PolePlacement => {
            let unit_first_order =
                fotd_parameters(plant).filter(|(k, _, l)| (k - 1.0).abs() <= 1e-12 && *l == 0.0);
            let (_, t, _) = unit_first_order
                .ok_or("plant is not a unit-gain first-order lag without dead time")?;
            let DesiredSpec::SecondOrder { po, ts } = problem.spec() else {
                return Err("target is not a second-order (po, ts) specification".into());
            };
            pole_placement_pi_first_order(t, *po, *ts).map_err(|e| e.to_string())
        }
    }
}

fn cmd_compare(args: &Args) -> Result<u8, Failure> {
    let resolved = load(args)?;
    let problem = resolved.problem(args.seed)?;
    let mut methods: Vec<Method> = Vec::new();
    let requested = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods.clone()
    };
    for m in requested {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }

    let mut rows = Vec::new();
    let mut results: Vec<(&str, TuneResult)> = Vec::new();
    for m in methods {
        let outcome = match m {
            Method::Srcf => tune(&problem).map_err(|e| e.to_string()),
            _ => baseline(m, &problem)
                .and_then(|g| evaluate(&problem, &g).map_err(|e| e.to_string())),
        };
        match outcome {
            Ok(result) => {
                rows.push(Row::ran(m.name(), &result));
                results.push((m.name(), result));
            }
            Err(reason) => rows.push(Row::skipped(m.name(), reason)),
        }
    }
    if results.is_empty() {
        print_summary(&rows);
        return Err(Failure::Numeric(
            "none of the requested methods could be applied".into(),
        ));
    }

    prepare_out(&args.out)?;
    let mut traces: Vec<(&str, &TimeSeries)> = vec![("desired", problem.desired())];
    traces.extend(results.iter().map(|(name, r)| (*name, &r.response)));
    write_plot(&args.out, "Step response comparison", &traces)?;
    let table = Table {
        command: "compare".into(),
        rows,
        grid: problem.grid().into(),
        files: FilesOut {
            response_csv: None,
            plot_svg: Some("plot.svg".into()),
        },
        config: resolved.config,
    };
    write(&args.out, "table.json", &report::to_json(&table))?;
    write(&args.out, "table.csv", &table.to_csv())?;
    print_summary(&table.rows);
    Ok(0)
}

fn print_summary(rows: &[Row]) {
    let color = std::env::var_os("PIDFIT_NO_COLOR").is_none();
    let paint = |code: &str, s: &str| {
        if color {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    };
    let num = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    println!(
        "{:<15} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7}  status",
        "method", "Kp", "Ki", "Kd", "Ts", "PO%", "IAE", "Ms"
    );
    for r in rows {
        let g = r.gains.as_ref();
        let m = r.metrics.as_ref();
        let status = match (r.status.as_str(), r.stable) {
            ("skipped", _) => paint(
                "33",
                &format!("skipped: {}", r.reason.as_deref().unwrap_or("")),
            ),
            (_, Some(true)) => paint("32", "stable"),
            _ => paint("31", "UNSTABLE"),
        };
        println!(
            "{:<15} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7}  {status}",
            r.method,
            num(g.map(|g| g.kp)),
            num(g.map(|g| g.ki)),
            num(g.map(|g| g.kd)),
            num(m.and_then(|m| m.ts)),
            num(m.and_then(|m| m.po_pct)),
            num(m.and_then(|m| m.iae)),
            num(m.and_then(|m| m.ms)),
        );
    }
}
