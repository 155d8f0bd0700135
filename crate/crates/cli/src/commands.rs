//! The four subcommands. Each returns the text to print and an exit code;
//! files go under the configured output directory.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lagrangekit::diagnostics::{certify, KktTolerances};
use lagrangekit::fmt::sig6;
use lagrangekit::model::DEFAULT_FEASIBILITY_TOL;
use lagrangekit::tuner::{reference_replay, run_bisection, BisectionState, BisectionStatus};
use lagrangekit_smallnet::checkpoint::write_checkpoint;
use lagrangekit_smallnet::Formulation;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Command, ProblemConfig, RunConfig, SchemeConfig, SweepAxis};
use crate::error::CliError;
use crate::experiments::{kkt_residual, rate_metrics, run_once, scheme_at, validate_optimizers, Built, SparsitySetup};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const BISECT_FILE: &str = "bisect.csv";
pub const REPORT_FILE: &str = "kkt_report.txt";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const MODEL_FILE: &str = "model.lknt";

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn ok(stdout: String, files: Vec<PathBuf>) -> Self {
        Self { code: 0, stdout, files }
    }
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Solve => cmd_solve(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Bisect => cmd_bisect(cfg),
        Command::Certify => cmd_certify(cfg),
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn vec6(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|&x| sig6(x)).collect::<Vec<_>>().join(", "))
}

fn problem_name(p: &ProblemConfig) -> &'static str {
    match p {
        ProblemConfig::Concave2d { .. } => "concave2d",
        ProblemConfig::Convexquad {} => "convexquad",
        ProblemConfig::Rate { .. } => "rate",
        ProblemConfig::Sparsity { .. } => "sparsity",
    }
}

fn scheme_name(s: &SchemeConfig) -> &'static str {
    match s {
        SchemeConfig::Penalized { .. } => "penalized",
        SchemeConfig::Lagrangian {} => "lagrangian",
        SchemeConfig::Augmented { .. } => "augmented",
        SchemeConfig::Proxy {} => "proxy",
    }
}

fn sparsity_formulation(scheme: &SchemeConfig, target: f64, dual_lr: f64) -> Formulation<f32> {
    match scheme {
        SchemeConfig::Lagrangian {} => Formulation::Lagrangian { target: target as f32, dual_lr: dual_lr as f32 },
        SchemeConfig::Penalized { c, .. } => Formulation::Penalized { c: *c as f32 },
        // Rejected at validation.
        _ => unreachable!("sparsity runs are penalized or lagrangian"),
    }
}

/// One optimization: writes the trace and prints the final state.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if let ProblemConfig::Sparsity { .. } = cfg.problem {
        return solve_sparsity(cfg);
    }
    validate_optimizers(cfg)?;
    let built = Built::new(cfg)?;
    prepare_out(&cfg.out)?;
    let trace = run_once(cfg, &built, &cfg.scheme, cfg.dual.step_size)?;
    let trace_path = cfg.out.join(TRACE_FILE);
    trace.write_csv(create(&trace_path)?)?;

    let last = trace.last();
    let mut s = String::new();
    let _ = writeln!(s, "problem = {}", problem_name(&cfg.problem));
    let _ = writeln!(s, "scheme = {}", scheme_name(&cfg.scheme));
    let _ = writeln!(s, "iterations = {}", cfg.iterations);
    let _ = writeln!(s, "x = {}", vec6(&last.x));
    let _ = writeln!(s, "f = {}", sig6(last.f));
    let _ = writeln!(s, "g = {}", vec6(&last.g));
    let _ = writeln!(s, "h = {}", vec6(&last.h));
    let _ = writeln!(s, "lambda = {}", vec6(&last.lambda));
    let _ = writeln!(s, "mu = {}", vec6(&last.mu));
    let _ = writeln!(s, "feasible = {}", last.feasible);
    let _ = writeln!(s, "kkt_residual = {}", sig6(kkt_residual(&built, &last.x, &last.lambda, &last.mu)?));
    if let (Some((rate, acc)), ProblemConfig::Rate { target_rate, .. }) = (rate_metrics(&built, &last.x), &cfg.problem) {
        let _ = writeln!(s, "class0_rate_pct = {}", sig6(100.0 * rate));
        let _ = writeln!(s, "accuracy_pct = {}", sig6(100.0 * acc));
        let _ = writeln!(s, "rate_feasible = {}", rate >= target_rate - DEFAULT_FEASIBILITY_TOL);
    }
    let summary_path = cfg.out.join(SUMMARY_FILE);
    write_text(&summary_path, &s)?;
    Ok(Outcome::ok(s, vec![trace_path, summary_path]))
}

fn solve_sparsity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let setup = SparsitySetup::new(cfg)?;
    prepare_out(&cfg.out)?;
    let formulation = sparsity_formulation(&cfg.scheme, setup.density_target, cfg.dual.step_size);
    let trained = setup.train(formulation).map_err(CliError::runtime)?;
    let r = &trained.report;

    let epochs_path = cfg.out.join(EPOCHS_FILE);
    let mut w = csv::Writer::from_writer(create(&epochs_path)?);
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(["epoch", "density_pct"]).map_err(csv_err)?;
    for (i, d) in r.epoch_density.iter().enumerate() {
        w.write_record([(i + 1).to_string(), sig6(100.0 * *d as f64)]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut files = vec![epochs_path];
    if let Some(gates) = &trained.gates {
        let model_path = cfg.out.join(MODEL_FILE);
        write_checkpoint(create(&model_path)?, &trained.net, gates)?;
        files.push(model_path);
    }

    let mut s = String::new();
    let _ = writeln!(s, "problem = sparsity");
    let _ = writeln!(s, "scheme = {}", scheme_name(&cfg.scheme));
    let _ = writeln!(s, "density_pct = {}", sig6(100.0 * r.density as f64));
    let _ = writeln!(s, "accuracy_pct = {}", sig6(100.0 * r.accuracy as f64));
    let _ = writeln!(s, "final_loss = {}", sig6(r.final_loss as f64));
    if let Some(l) = r.lambda {
        let _ = writeln!(s, "lambda = {}", sig6(l as f64));
    }
    let _ = writeln!(s, "feasible = {}", (r.density as f64) <= setup.density_target + DEFAULT_FEASIBILITY_TOL);
    let _ = writeln!(s, "steps = {}", r.steps);
    let summary_path = cfg.out.join(SUMMARY_FILE);
    write_text(&summary_path, &s)?;
    files.push(summary_path);
    Ok(Outcome::ok(s, files))
}

/// One aggregated row of a sweep. A failed run keeps its value and error
/// with empty metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metric: Option<f64>,
    pub accuracy: Option<f64>,
    pub feasible: bool,
    pub error: Option<String>,
}

/// Name of the metric column: class-0 rate or density (percent), otherwise
/// the first primal coordinate.
pub fn sweep_metric_name(p: &ProblemConfig) -> &'static str {
    match p {
        ProblemConfig::Rate { .. } => "class0_rate_pct",
        ProblemConfig::Sparsity { .. } => "density_pct",
        _ => "x_0",
    }
}

pub fn write_sweep_csv<W: std::io::Write>(metric: &str, rows: &[SweepRow], w: W) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["value", metric, "accuracy_pct", "feasible", "error"]).map_err(err)?;
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    for r in rows {
        w.write_record([
            sig6(r.value),
            opt(r.metric),
            opt(r.accuracy),
            (if r.feasible { "1" } else { "0" }).to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Parse a sweep CSV; returns the metric column name and the rows.
pub fn read_sweep_csv<R: std::io::Read>(r: R) -> Result<(String, Vec<SweepRow>), CliError> {
    let bad = |m: String| CliError::Invalid(format!("sweep csv: {m}"));
    let mut rd = csv::Reader::from_reader(r);
    let h = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if h.len() != 5 || &h[0] != "value" || &h[2] != "accuracy_pct" || &h[3] != "feasible" || &h[4] != "error" {
        return Err(bad(format!("unexpected header {h:?}")));
    }
    let num = |s: &str| -> Result<Option<f64>, CliError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| bad(format!("{s:?}: {e}")))
        }
    };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        rows.push(SweepRow {
            value: num(&rec[0])?.ok_or_else(|| bad("empty value".into()))?,
            metric: num(&rec[1])?,
            accuracy: num(&rec[2])?,
            feasible: match &rec[3] {
                "1" => true,
                "0" => false,
                o => return Err(bad(format!("feasible flag {o:?}"))),
            },
            error: (!rec[4].is_empty()).then(|| rec[4].to_string()),
        });
    }
    Ok((h[1].to_string(), rows))
}

fn sweep_one(cfg: &RunConfig, built: Option<&Built>, sparsity: Option<&SparsitySetup>, v: f64) -> SweepRow {
    let penalty = cfg.sweep.axis == SweepAxis::Penalty;
    let result: Result<(Option<f64>, Option<f64>, bool), CliError> = (|| {
        if let Some(setup) = sparsity {
            let scheme = scheme_at(&cfg.scheme, penalty, v);
            let lr = if penalty { cfg.dual.step_size } else { v };
            let t = setup.train(sparsity_formulation(&scheme, setup.density_target, lr)).map_err(CliError::runtime)?;
            let d = t.report.density as f64;
            let ok = d <= setup.density_target + DEFAULT_FEASIBILITY_TOL;
            return Ok((Some(100.0 * d), Some(100.0 * t.report.accuracy as f64), ok));
        }
        let built = built.expect("built for iterate problems");
        let scheme = scheme_at(&cfg.scheme, penalty, v);
        let step = if penalty { cfg.dual.step_size } else { v };
        let trace = run_once(cfg, built, &scheme, step)?;
        let last = trace.last();
        match (rate_metrics(built, &last.x), &cfg.problem) {
            (Some((rate, acc)), ProblemConfig::Rate { target_rate, .. }) => {
                Ok((Some(100.0 * rate), Some(100.0 * acc), rate >= target_rate - DEFAULT_FEASIBILITY_TOL))
            }
            _ => Ok((Some(last.x[0]), None, last.feasible)),
        }
    })();
    match result {
        Ok((metric, accuracy, feasible)) => SweepRow { value: v, metric, accuracy, feasible, error: None },
        Err(e) => SweepRow { value: v, metric: None, accuracy: None, feasible: false, error: Some(e.to_string()) },
    }
}

/// Sweep rows for every axis value, computed on `jobs` threads and returned
/// sorted by value.
pub fn sweep_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let (built, sparsity) = match cfg.problem {
        ProblemConfig::Sparsity { .. } => (None, Some(SparsitySetup::new(cfg)?)),
        _ => {
            validate_optimizers(cfg)?;
            (Some(Built::new(cfg)?), None)
        }
    };
    let mut values = cfg.sweep.values.clone();
    values.sort_by(f64::total_cmp);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(CliError::runtime)?;
    let rows = pool.install(|| {
        values
            .par_iter()
            .map(|&v| sweep_one(cfg, built.as_ref(), sparsity.as_ref(), v))
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

/// One run per axis value, aggregated into a CSV sorted by value. Failed
/// runs are recorded and do not stop the sweep.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rows = sweep_rows(cfg)?;
    prepare_out(&cfg.out)?;
    let path = cfg.out.join(SWEEP_FILE);
    let metric = sweep_metric_name(&cfg.problem);
    write_sweep_csv(metric, &rows, create(&path)?)?;
    let mut text = Vec::new();
    write_sweep_csv(metric, &rows, &mut text)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let mut s = String::from_utf8(text).expect("csv output is utf-8");
    let _ = writeln!(s, "runs = {}, failed = {}", rows.len(), failed);
    Ok(Outcome::ok(s, vec![path]))
}

/// Log-scale bisection over the penalty coefficient, live or replayed.
pub fn bisection(cfg: &RunConfig) -> Result<BisectionState<f64>, CliError> {
    let b = &cfg.bisect;
    let state = BisectionState::new(b.lo, b.hi, b.target, b.tol, b.max_iters)?.inverted(b.inverted);
    if b.stub {
        return Ok(run_bisection(reference_replay, state));
    }
    let setup = SparsitySetup::new(cfg)?;
    Ok(run_bisection(|c| setup.probe(c), state))
}

pub fn cmd_bisect(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let state = bisection(cfg)?;
    prepare_out(&cfg.out)?;
    let path = cfg.out.join(BISECT_FILE);
    state.write_history_csv(create(&path)?)?;

    let mut s = String::new();
    for r in &state.history {
        let opt = |v: Option<f64>| v.map(sig6).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "iteration = {}, coefficient = {}, metric = {}, accuracy = {}",
            r.iteration,
            sig6(r.coefficient),
            opt(r.metric),
            opt(r.accuracy)
        );
    }
    let status = match state.status {
        BisectionStatus::Converged => "converged",
        BisectionStatus::Exhausted => "exhausted",
        BisectionStatus::Failed => "failed",
        BisectionStatus::Running => "running",
    };
    let _ = writeln!(s, "status = {status}");
    let _ = writeln!(s, "steps = {}", state.steps);
    let _ = writeln!(s, "solves = {}", state.history.len());
    for a in &state.anomalies {
        let _ = writeln!(s, "anomaly = {a}");
    }
    if state.status == BisectionStatus::Failed {
        let why = state.history.iter().rev().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(CliError::Runtime(format!("bisection probe failed: {why}\n{s}")));
    }
    Ok(Outcome::ok(s, vec![path]))
}

/// Candidate point for certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub x: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
}

impl Candidate {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read candidate {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("candidate {}: {e}", path.display())))
    }
}

fn tolerances(cfg: &RunConfig) -> KktTolerances {
    let d = KktTolerances::default();
    let t = &cfg.tolerances;
    KktTolerances {
        feas: t.feas.unwrap_or(d.feas),
        stat: t.stat.unwrap_or(d.stat),
        comp_slack: t.comp_slack.unwrap_or(d.comp_slack),
        active: t.active.unwrap_or(d.active),
        fd_step: t.fd_step.unwrap_or(d.fd_step),
    }
}

/// Exit 0 when the candidate passes, 1 when it fails.
pub fn cmd_certify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let path = cfg.candidate.as_ref().expect("validated");
    let cand = Candidate::load(path)?;
    let built = Built::new(cfg)?;
    let problem = built.smooth();
    if cand.x.len() != problem.dim() {
        return Err(CliError::Invalid(format!("candidate x has {} entries, the problem has {}", cand.x.len(), problem.dim())));
    }
    let report = certify(problem, &DVector::from_row_slice(&cand.x), &cand.lambda, &cand.mu, &tolerances(cfg))?;
    let text = report.to_key_value();
    prepare_out(&cfg.out)?;
    let out = cfg.out.join(REPORT_FILE);
    write_text(&out, &text)?;
    Ok(Outcome { code: if report.passed() { 0 } else { 1 }, stdout: text, files: vec![out] })
}
