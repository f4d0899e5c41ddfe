use std::path::Path;
use std::process::{Command, Output};

use pidfit_cli::report::{to_json, RunReport};
use tempfile::TempDir;

const HIGH_ORDER: &str = r#"
[plant]
num = [1.0]
den = [1.0, 3.0, 3.0, 1.0]

[target]
kind = "custom_tf"
num = [1.0]
den = [3.0, 1.0]

[controller]
hi = ["inf", "inf", 0.0]

[simulation]
t_final = 40.0
n_samples = 2000
"#;

const DELAYED: &str = r#"
[plant]
num = [1.0]
den = [1.0, 1.0]
delay = 1.0

[target]
kind = "fotd"
tcl = 2.0

[controller]
hi = ["inf", "inf", 0.0]

[simulation]
t_final = 25.0
n_samples = 2000
"#;

const UNDERDAMPED: &str = r#"
[plant]
num = [1.0]
den = [1.0, 3.0, 3.0, 1.0]

[target]
kind = "second_order"
zeta = 0.215
wn = 1.7309

[simulation]
t_final = 20.0
n_samples = 2000
"#;

const FIRST_ORDER: &str = r#"
[plant]
num = [1.0]
den = [1.0, 1.0]

[target]
kind = "second_order"
po = 5.0
ts = 1.0

[controller]
hi = ["inf", "inf", 0.0]

[simulation]
t_final = 4.0
n_samples = 2000
"#;

fn pidfit(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pidfit"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .env("PIDFIT_NO_COLOR", "1")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    ((a - b) / b).abs() <= tol
}

#[test]
fn tune_high_order_plant() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(dir.path(), HIGH_ORDER, &["tune"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(dir.path(), "report.json");
    let kp = report["gains"]["kp"].as_f64().unwrap();
    let ki = report["gains"]["ki"].as_f64().unwrap();
    assert!(
        rel_close(kp, 0.9243, 0.02) && rel_close(ki, 0.2830, 0.02),
        "{kp} {ki}"
    );
    assert_eq!(report["gains"]["kd"].as_f64(), Some(0.0));
    assert_eq!(report["stable"].as_bool(), Some(true));
    assert!(dir.path().join("out/plot.svg").exists());
}

#[test]
fn response_csv_has_header_and_one_row_per_sample() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(dir.path(), FIRST_ORDER, &["tune"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = read(dir.path(), "response.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,y_desired,y_actual"));
    assert_eq!(lines.count(), 2000);
}

#[test]
fn report_round_trips_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(dir.path(), FIRST_ORDER, &["tune"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = read(dir.path(), "report.json");
    let report: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(to_json(&report), text);
}

#[test]
fn same_config_gives_identical_reports() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let config = format!("{DELAYED}\n[optimizer]\nn_starts = 3\nseed = 7\n");
    assert_eq!(code(&pidfit(a.path(), &config, &["tune"])), 0);
    assert_eq!(code(&pidfit(b.path(), &config, &["tune"])), 0);
    assert_eq!(read(a.path(), "report.json"), read(b.path(), "report.json"));
    assert_eq!(
        read(a.path(), "response.csv"),
        read(b.path(), "response.csv")
    );
    assert_eq!(read(a.path(), "plot.svg"), read(b.path(), "plot.svg"));
}

#[test]
fn trajectory_shorter_than_the_horizon_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[plant]
num = [1.0]
den = [1.0, 1.0]

[target]
kind = "trajectory"
t = [0.0, 1.0, 2.0, 3.0]
y = [0.0, 0.6, 0.9, 1.0]

[simulation]
t_final = 10.0
"#;
    let out = pidfit(dir.path(), config, &["tune"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn forced_high_gain_is_reported_unstable() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[plant]
num = [1.0]
den = [1.0, 3.0, 3.0, 1.0]

[target]
kind = "custom_tf"
num = [1.0]
den = [3.0, 1.0]

[controller]
lo = [50.0, 0.0, 0.0]
hi = [50.0, 0.0, 0.0]

[simulation]
t_final = 40.0
n_samples = 2000
"#;
    let out = pidfit(dir.path(), config, &["tune"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let report = json(dir.path(), "report.json");
    assert_eq!(report["stable"].as_bool(), Some(false));
    assert!(report["metrics"]["ts"].is_null());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = format!("{FIRST_ORDER}\n[optimizer]\nmax_eval = 10\n");
    let out = pidfit(dir.path(), &config, &["tune"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("max_eval"), "{}", stderr(&out));
}

#[test]
fn negative_delay_names_the_key() {
    let dir = TempDir::new().unwrap();
    let config = FIRST_ORDER.replace("den = [1.0, 1.0]", "den = [1.0, 1.0]\ndelay = -0.5");
    let out = pidfit(dir.path(), &config, &["tune"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("plant.delay"), "{}", stderr(&out));
}

#[test]
fn bad_command_line_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&pidfit(
            dir.path(),
            FIRST_ORDER,
            &["tune", "--methods", "bogus"]
        )),
        3
    );
    assert_eq!(code(&pidfit(dir.path(), FIRST_ORDER, &["evaluate"])), 3);
    assert_eq!(
        code(&pidfit(
            dir.path(),
            FIRST_ORDER,
            &["evaluate", "--gains", "1,2"]
        )),
        3
    );
    assert_eq!(
        code(&pidfit(
            dir.path(),
            FIRST_ORDER,
            &["evaluate", "--gains", "-1,0,0"]
        )),
        3
    );
}

#[test]
fn compare_skips_lambda_on_a_non_fotd_plant() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(dir.path(), HIGH_ORDER, &["compare"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = json(dir.path(), "table.json");
    let rows = table["rows"].as_array().unwrap();
    let methods: Vec<&str> = rows.iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(
        methods,
        [
            "srcf",
            "zn-reaction",
            "zn-ultimate",
            "lambda",
            "pole-placement"
        ]
    );
    let lambda = &rows[3];
    assert_eq!(lambda["status"].as_str(), Some("skipped"));
    assert_eq!(
        lambda["reason"].as_str(),
        Some("plant is not first-order-plus-delay")
    );
    let csv = read(dir.path(), "table.csv");
    assert_eq!(
        csv.lines().next(),
        Some("method,status,kp,ki,kd,ts,po_pct,iae,ms,stable,objective,evals_used,reason")
    );
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn compare_underdamped_against_reaction_curve_rule() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(
        dir.path(),
        UNDERDAMPED,
        &["compare", "--methods", "srcf,zn-reaction"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = json(dir.path(), "table.json");
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let iae = |r: &serde_json::Value| r["metrics"]["iae"].as_f64().unwrap();
    let objective = |r: &serde_json::Value| r["objective"].as_f64().unwrap();
    assert!(objective(&rows[0]) <= objective(&rows[1]));
    assert!(iae(&rows[0]).is_finite() && iae(&rows[1]).is_finite());
    let kp = rows[1]["gains"]["kp"].as_f64().unwrap();
    assert!(rel_close(kp, 5.5042, 1e-3), "{kp}");
}

#[test]
fn compare_delayed_plant_with_lambda() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(
        dir.path(),
        DELAYED,
        &["compare", "--methods", "srcf,lambda"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = json(dir.path(), "table.json");
    let rows = table["rows"].as_array().unwrap();
    let lambda = &rows[1];
    assert_eq!(lambda["status"].as_str(), Some("ok"));
    // 1/(1 + 2) for both gains
    let kp = lambda["gains"]["kp"].as_f64().unwrap();
    let ki = lambda["gains"]["ki"].as_f64().unwrap();
    assert!((kp - 1.0 / 3.0).abs() < 1e-12 && (ki - 1.0 / 3.0).abs() < 1e-12);
    let ms = |r: &serde_json::Value| r["metrics"]["ms"].as_f64().unwrap();
    assert!(ms(&rows[0]) < 2.0 && ms(lambda) < 2.0);
    let svg = read(dir.path(), "plot.svg");
    for label in [">desired<", ">srcf<", ">lambda<"] {
        assert!(svg.contains(label), "{label}");
    }
}

#[test]
fn pole_placement_runs_on_a_unit_first_order_plant() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(
        dir.path(),
        FIRST_ORDER,
        &["compare", "--methods", "pole-placement"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = json(dir.path(), "table.json");
    let row = &table["rows"][0];
    assert_eq!(row["status"].as_str(), Some("ok"));
    assert!(row["gains"]["kp"].as_f64().unwrap() > 0.0);
}

#[test]
fn compare_with_nothing_runnable_fails() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(dir.path(), HIGH_ORDER, &["compare", "--methods", "lambda"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn simulate_open_loop_first_order() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[plant]
num = [1.0]
den = [1.0, 1.0]

[simulation]
t_final = 10.0
n_samples = 1001
"#;
    let out = pidfit(dir.path(), config, &["simulate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = read(dir.path(), "response.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,y"));
    let row = lines.nth(100).unwrap();
    let (t, y) = row.split_once(',').unwrap();
    assert_eq!(t, "1");
    let y: f64 = y.parse().unwrap();
    assert!((y - 0.632121).abs() < 1e-6, "{y}");
}

#[test]
fn simulate_closed_loop_overshoot() {
    let dir = TempDir::new().unwrap();
    let config = r#"
[plant]
num = [1.0]
den = [1.0, 1.0]

[simulation]
t_final = 4.0
n_samples = 4001
"#;
    let out = pidfit(dir.path(), config, &["simulate", "--gains", "11,36,0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = read(dir.path(), "response.csv");
    let peak = csv
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let po = 100.0 * (peak - 1.0);
    assert!((po - 9.23).abs() < 0.1, "{po}");
}

#[test]
fn evaluate_reports_fixed_gains() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(dir.path(), FIRST_ORDER, &["evaluate", "--gains", "2,3,0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(dir.path(), "report.json");
    assert_eq!(report["command"].as_str(), Some("evaluate"));
    assert_eq!(report["gains"]["kp"].as_f64(), Some(2.0));
    assert_eq!(report["evals_used"].as_u64(), Some(1));
}

#[test]
fn no_color_env_disables_escape_codes() {
    let dir = TempDir::new().unwrap();
    let out = pidfit(dir.path(), HIGH_ORDER, &["compare"]);
    assert!(!String::from_utf8_lossy(&out.stdout).contains('\x1b'));
}
