//! End-to-end runs of the `lagrangekit` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lagrangekit::optimizers::Trace;
use lagrangekit::tuner::read_history_csv;
use lagrangekit_cli::commands::read_sweep_csv;
use tempfile::TempDir;

fn lk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagrangekit"))
        .args(args)
        .current_dir(dir)
        .env_remove("LAGRANGEKIT_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn exit_code_matrix() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    let good = write(p, "good.json", r#"{"command": "solve", "iterations": 200}"#);
    let typo = write(p, "typo.json", r#"{"command": "solve", "strid": 2}"#);
    let zero = write(p, "zero.json", r#"{"command": "solve", "iterations": 0}"#);
    let wrong = write(p, "wrong.json", r#"{"command": "sweep"}"#);
    let sol = write(p, "sol.json", r#"{"x": [0.5235987755982988, 0], "lambda": [0.5773502691896258]}"#);
    let origin = write(p, "origin.json", r#"{"x": [0, 0], "lambda": [0]}"#);
    let trunc = write(p, "trunc.json", r#"{"x": [0.52, 0], "lamb"#);
    let short = write(p, "short.json", r#"{"x": [0.52]}"#);
    let nan_start = write(p, "nan.json", r#"{"command": "solve", "problem": {"kind": "convexquad"}, "primal": {"kind": "gd", "step_size": 1e300}, "iterations": 5}"#);

    let cases: Vec<(Vec<&str>, u8)> = vec![
        (vec!["solve", "--config", &good], 0),
        (vec!["solve", "--config", &typo], 2),
        (vec!["solve", "--config", &zero], 2),
        (vec!["solve", "--config", &wrong], 2),
        (vec!["solve", "--config", "missing.json"], 2),
        (vec!["solve", "--stride", "0"], 2),
        (vec!["solve", "--bogus"], 2),
        (vec!["certify", "--candidate", &sol], 0),
        (vec!["certify", "--candidate", &origin], 1),
        (vec!["certify", "--candidate", &trunc], 2),
        (vec!["certify", "--candidate", &short], 2),
        (vec!["certify"], 2),
        (vec!["bisect", "--stub"], 0),
        (vec!["solve", "--config", &nan_start], 3),
    ];
    for (args, code) in cases {
        let o = lk(&args, p);
        assert_eq!(o.status.code(), Some(code as i32), "{args:?}: {}{}", stdout(&o), stderr(&o));
    }
    let o = lk(&["solve", "--config", &typo], p);
    assert!(stderr(&o).contains("strid"), "{}", stderr(&o));
}

#[test]
fn solve_reports_the_constrained_optimum() {
    let d = TempDir::new().unwrap();
    let o = lk(&["solve", "--out", "run"], d.path());
    assert!(o.status.success());
    let out = stdout(&o);
    let x: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("x = ["))
        .and_then(|l| l.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((x - 0.5236).abs() <= 1e-3, "{out}");
    for key in ["f = ", "g = ", "lambda = ", "feasible = true", "kkt_residual = "] {
        assert!(out.contains(key), "missing {key} in {out}");
    }
    let trace = Trace::<f64>::read_csv(fs::File::open(d.path().join("run/trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.records.len(), 10_001);
}

#[test]
fn output_dir_precedence() {
    let d = TempDir::new().unwrap();
    let cfg = write(d.path(), "c.json", r#"{"command": "solve", "iterations": 10, "out": "from_file"}"#);
    let run = |args: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_lagrangekit"));
        c.args(args).current_dir(d.path()).env_remove("LAGRANGEKIT_OUT");
        if let Some(e) = env {
            c.env("LAGRANGEKIT_OUT", e);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(&["solve", "--config", &cfg, "--out", "from_flag"], Some("from_env"));
    run(&["solve", "--config", &cfg], Some("from_env"));
    run(&["solve", "--stride", "5"], Some("from_env"));
    assert!(d.path().join("from_flag/trace.csv").is_file());
    assert!(d.path().join("from_file/trace.csv").is_file());
    let t = Trace::<f64>::read_csv(fs::File::open(d.path().join("from_env/trace.csv")).unwrap()).unwrap();
    // Records 0, 5, ..., 10000.
    assert_eq!(t.records.len(), 2001);
}

#[test]
fn sweep_csv_round_trips_and_is_sorted() {
    let d = TempDir::new().unwrap();
    let cfg = write(
        d.path(),
        "s.json",
        r#"{"command": "sweep", "problem": {"kind": "rate"}, "iterations": 2000,
            "sweep": {"axis": "dual_step", "values": [1, 0.01, 0, 0.1]}}"#,
    );
    let o = lk(&["sweep", "--config", &cfg, "--jobs", "3", "--out", "s"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("s/sweep.csv")).unwrap();
    let (metric, rows) = read_sweep_csv(text.as_bytes()).unwrap();
    assert_eq!(metric, "class0_rate_pct");
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    assert_eq!(values, [0.0, 0.01, 0.1, 1.0]);
    assert!(rows.iter().all(|r| r.error.is_none() && r.metric.is_some()));
    let mut again = Vec::new();
    lagrangekit_cli::commands::write_sweep_csv(&metric, &rows, &mut again).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), text);
}

#[test]
fn sweep_records_failures_and_continues() {
    let d = TempDir::new().unwrap();
    // The primal step diverges once the multiplier is huge.
    let cfg = write(
        d.path(),
        "s.json",
        r#"{"command": "sweep", "problem": {"kind": "concave2d", "eps": 0.5}, "iterations": 500,
            "sweep": {"axis": "penalty", "values": [1e308, 2, 0.5]}}"#,
    );
    let o = lk(&["sweep", "--config", &cfg, "--out", "s"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_sweep_csv(fs::File::open(d.path().join("s/sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].error.is_none() && rows[1].error.is_none());
    assert!(rows[2].error.is_some() && rows[2].metric.is_none() && !rows[2].feasible);
}

#[test]
fn single_value_sweep_matches_solve() {
    let d = TempDir::new().unwrap();
    let solve = write(d.path(), "a.json", r#"{"command": "solve", "problem": {"kind": "rate"}, "dual": {"kind": "ga", "step_size": 0.1}}"#);
    let sweep = write(
        d.path(),
        "b.json",
        r#"{"command": "sweep", "problem": {"kind": "rate"}, "sweep": {"axis": "dual_step", "values": [0.1]}}"#,
    );
    let a = stdout(&lk(&["solve", "--config", &solve, "--out", "a"], d.path()));
    assert!(lk(&["sweep", "--config", &sweep, "--out", "b"], d.path()).status.success());
    let (_, rows) = read_sweep_csv(fs::File::open(d.path().join("b/sweep.csv")).unwrap()).unwrap();
    let field = |k: &str| -> f64 { a.lines().find_map(|l| l.strip_prefix(k)).unwrap().parse().unwrap() };
    assert_eq!(rows[0].metric, Some(field("class0_rate_pct = ")));
    assert_eq!(rows[0].accuracy, Some(field("accuracy_pct = ")));
    assert_eq!(rows[0].feasible, a.contains("rate_feasible = true"));
}

#[test]
fn bisect_stub_history() {
    let d = TempDir::new().unwrap();
    let o = lk(&["bisect", "--stub", "--out", "b"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("status = converged"));
    let h = read_history_csv(fs::File::open(d.path().join("b/bisect.csv")).unwrap()).unwrap();
    let cs: Vec<f64> = h.iter().map(|r| lagrangekit::tuner::round3(r.coefficient)).collect();
    assert_eq!(cs, [1e-3, 1.0, 3.16e-2, 1.78e-1, 4.22e-1, 2.74e-1, 2.21e-1]);

    let cfg = write(d.path(), "e.json", r#"{"command": "bisect", "bisect": {"max_iters": 0, "stub": true}}"#);
    assert!(lk(&["bisect", "--config", &cfg, "--out", "e"], d.path()).status.success());
    let h = read_history_csv(fs::File::open(d.path().join("e/bisect.csv")).unwrap()).unwrap();
    assert_eq!(h.len(), 2);
}

#[test]
fn certify_writes_the_report() {
    let d = TempDir::new().unwrap();
    let c = write(d.path(), "c.json", r#"{"x": [0, 0], "lambda": [0]}"#);
    let o = lk(&["certify", "--candidate", &c, "--out", "k"], d.path());
    let report = fs::read_to_string(d.path().join("k/kkt_report.txt")).unwrap();
    assert_eq!(report, stdout(&o));
    assert!(report.contains("second_order = fail") && report.contains("min_projected_eigenvalue = -1"));
}

#[test]
fn repeated_runs_write_identical_files() {
    let d = TempDir::new().unwrap();
    for out in ["r1", "r2"] {
        assert!(lk(&["solve", "--seed", "5", "--out", out], d.path()).status.success());
    }
    let a = fs::read(d.path().join("r1/trace.csv")).unwrap();
    let b = fs::read(d.path().join("r2/trace.csv")).unwrap();
    assert_eq!(a, b);
    let a = fs::read(d.path().join("r1/summary.txt")).unwrap();
    let b = fs::read(d.path().join("r2/summary.txt")).unwrap();
    assert_eq!(a, b);
}
