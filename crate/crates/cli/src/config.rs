//! Run configuration: a JSON document with a top-level `command`, merged with
//! command-line flags (flags win) and per-problem defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const OUT_ENV: &str = "LAGRANGEKIT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Bisect,
    Certify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Bisect => "bisect",
            Command::Certify => "certify",
        }
    }
}

fn d_eps() -> f64 {
    0.5
}
fn d_rate() -> f64 {
    0.7
}
fn d_per_class() -> usize {
    100
}
fn d_sep() -> f64 {
    4.0
}
fn d_std() -> f64 {
    0.5
}
fn d_density() -> f64 {
    0.5
}
fn d_epochs() -> usize {
    20
}
fn d_samples() -> usize {
    4000
}
fn d_batch() -> usize {
    256
}
fn d_gate_lr() -> f64 {
    0.1
}
fn d_lr() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    Concave2d {
        #[serde(default = "d_eps")]
        eps: f64,
    },
    Convexquad {},
    Rate {
        #[serde(default = "d_rate")]
        target_rate: f64,
        #[serde(default = "d_per_class")]
        n_per_class: usize,
        #[serde(default = "d_sep")]
        mean_separation: f64,
        #[serde(default = "d_std")]
        std: f64,
    },
    Sparsity {
        #[serde(default = "d_density")]
        density_target: f64,
        #[serde(default = "d_epochs")]
        epochs: usize,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_batch")]
        batch_size: usize,
        #[serde(default = "d_lr")]
        lr: f64,
        #[serde(default = "d_gate_lr")]
        gate_lr: f64,
        /// Directory holding the IDX digit files; synthetic data when absent.
        #[serde(default)]
        data: Option<PathBuf>,
    },
}

impl ProblemConfig {
    pub fn sparsity_default() -> Self {
        ProblemConfig::Sparsity {
            density_target: d_density(),
            epochs: d_epochs(),
            samples: d_samples(),
            batch_size: d_batch(),
            lr: d_lr(),
            gate_lr: d_gate_lr(),
            data: None,
        }
    }

    pub fn rate_default() -> Self {
        ProblemConfig::Rate {
            target_rate: d_rate(),
            n_per_class: d_per_class(),
            mean_separation: d_sep(),
            std: d_std(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SchemeConfig {
    /// Same coefficient on every inequality (`c`) and equality (`c_h`).
    Penalized {
        c: f64,
        #[serde(default)]
        c_h: f64,
    },
    Lagrangian {},
    Augmented { c: f64 },
    Proxy {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimalKind {
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimalConfig {
    pub kind: PrimalKind,
    pub step_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualKind {
    Ga,
    Nupi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualConfig {
    pub kind: DualKind,
    pub step_size: f64,
    #[serde(default)]
    pub kappa_p: f64,
    #[serde(default)]
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DualStep,
    Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn d_lo() -> f64 {
    1e-3
}
fn d_hi() -> f64 {
    1.0
}
fn d_target() -> f64 {
    50.0
}
fn d_tol() -> f64 {
    2.0
}
fn d_max_iters() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectConfig {
    #[serde(default = "d_lo")]
    pub lo: f64,
    #[serde(default = "d_hi")]
    pub hi: f64,
    /// Target metric (density in percent for sparsity runs).
    #[serde(default = "d_target")]
    pub target: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub stub: bool,
    #[serde(default)]
    pub inverted: bool,
}

impl Default for BisectConfig {
    fn default() -> Self {
        Self {
            lo: d_lo(),
            hi: d_hi(),
            target: d_target(),
            tol: d_tol(),
            max_iters: d_max_iters(),
            stub: false,
            inverted: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    pub feas: Option<f64>,
    pub stat: Option<f64>,
    pub comp_slack: Option<f64>,
    pub active: Option<f64>,
    pub fd_step: Option<f64>,
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Command,
    pub problem: Option<ProblemConfig>,
    pub scheme: Option<SchemeConfig>,
    pub primal: Option<PrimalConfig>,
    pub dual: Option<DualConfig>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub stride: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub x0: Option<Vec<f64>>,
    pub sweep: Option<SweepConfig>,
    pub bisect: Option<BisectConfig>,
    pub candidate: Option<PathBuf>,
    pub tolerances: Option<TolConfig>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flags {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub stride: Option<usize>,
    pub stub: bool,
    pub candidate: Option<PathBuf>,
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemConfig,
    pub scheme: SchemeConfig,
    pub primal: PrimalConfig,
    pub dual: DualConfig,
    pub iterations: usize,
    pub seed: u64,
    pub stride: usize,
    pub jobs: usize,
    pub out: PathBuf,
    pub x0: Option<Vec<f64>>,
    pub sweep: SweepConfig,
    pub bisect: BisectConfig,
    pub candidate: Option<PathBuf>,
    pub tolerances: TolConfig,
}

/// Default 20-value rate sweep axis: 0, then 1, 2.15, 4.6 per decade
/// from 1e-4 up to 1e2.
pub fn rate_sweep_axis() -> Vec<f64> {
    let mut v = vec![0.0];
    for k in -4..=1 {
        for m in [1.0, 2.15, 4.6] {
            v.push(m * 10f64.powi(k));
        }
    }
    v.push(100.0);
    v
}

fn default_problem(cmd: Command) -> ProblemConfig {
    match cmd {
        Command::Sweep => ProblemConfig::rate_default(),
        Command::Bisect => ProblemConfig::sparsity_default(),
        _ => ProblemConfig::Concave2d { eps: d_eps() },
    }
}

/// Settings that reproduce the reference runs of each problem.
fn problem_defaults(p: &ProblemConfig) -> (SchemeConfig, PrimalConfig, DualConfig, usize) {
    let gd = |s| PrimalConfig { kind: PrimalKind::Gd, step_size: s };
    match p {
        ProblemConfig::Concave2d { .. } => (
            SchemeConfig::Lagrangian {},
            gd(0.01),
            DualConfig { kind: DualKind::Nupi, step_size: 0.3, kappa_p: 40.0, nu: 0.0 },
            10_000,
        ),
        ProblemConfig::Convexquad {} => (
            SchemeConfig::Lagrangian {},
            gd(0.1),
            DualConfig { kind: DualKind::Ga, step_size: 0.05, kappa_p: 0.0, nu: 0.0 },
            10_000,
        ),
        ProblemConfig::Rate { .. } => (
            SchemeConfig::Proxy {},
            gd(0.02),
            DualConfig { kind: DualKind::Ga, step_size: 1e-2, kappa_p: 0.0, nu: 0.0 },
            10_000,
        ),
        ProblemConfig::Sparsity { .. } => (
            SchemeConfig::Penalized { c: 0.221, c_h: 0.0 },
            PrimalConfig { kind: PrimalKind::Adam, step_size: 1e-3 },
            DualConfig { kind: DualKind::Ga, step_size: 1e-2, kappa_p: 0.0, nu: 0.0 },
            1,
        ),
    }
}

/// Merge flags over the file over defaults. `env_out` is the value of
/// [`OUT_ENV`], used when neither flag nor file names an output directory.
pub fn resolve(cmd: Command, file: Option<FileConfig>, flags: Flags, env_out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    if let Some(f) = &file {
        if f.command != cmd {
            return Err(CliError::Invalid(format!(
                "config is for `{}` but `{}` was requested",
                f.command.name(),
                cmd.name()
            )));
        }
    }
    let f = file.unwrap_or(FileConfig {
        command: cmd,
        problem: None,
        scheme: None,
        primal: None,
        dual: None,
        iterations: None,
        seed: None,
        stride: None,
        jobs: None,
        out: None,
        x0: None,
        sweep: None,
        bisect: None,
        candidate: None,
        tolerances: None,
    });
    let problem = f.problem.unwrap_or_else(|| default_problem(cmd));
    let (scheme, primal, dual, iterations) = problem_defaults(&problem);
    let default_axis = match (&problem, cmd) {
        (ProblemConfig::Sparsity { .. }, _) => SweepConfig { axis: SweepAxis::Penalty, values: vec![1e-3, 3.16e-2, 1.0] },
        _ => SweepConfig { axis: SweepAxis::DualStep, values: rate_sweep_axis() },
    };
    let mut bisect = f.bisect.unwrap_or_default();
    bisect.stub |= flags.stub;
    let cfg = RunConfig {
        command: cmd,
        scheme: f.scheme.unwrap_or(scheme),
        primal: f.primal.unwrap_or(primal),
        dual: f.dual.unwrap_or(dual),
        iterations: f.iterations.unwrap_or(iterations),
        seed: flags.seed.or(f.seed).unwrap_or(0),
        stride: flags.stride.or(f.stride).unwrap_or(1),
        jobs: flags.jobs.or(f.jobs).unwrap_or(1),
        out: flags.out.or(f.out).or(env_out).unwrap_or_else(|| PathBuf::from(".")),
        x0: f.x0,
        sweep: f.sweep.unwrap_or(default_axis),
        bisect,
        candidate: flags.candidate.or(f.candidate),
        tolerances: f.tolerances.unwrap_or_default(),
        problem,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Invalid(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if !(self.primal.step_size > 0.0) {
            return bad("primal.step_size must be positive");
        }
        match &self.problem {
            ProblemConfig::Concave2d { eps } if !(*eps > 0.0 && *eps < 1.0) => return bad("problem.eps must lie in (0, 1)"),
            ProblemConfig::Rate { target_rate, n_per_class, .. } if !(0.0..=1.0).contains(target_rate) || *n_per_class == 0 => {
                return bad("problem.target_rate must lie in [0, 1] and n_per_class be positive")
            }
            ProblemConfig::Sparsity { density_target, epochs, samples, batch_size, .. }
                if !(*density_target > 0.0 && *density_target <= 1.0) || *epochs == 0 || *samples == 0 || *batch_size == 0 =>
            {
                return bad("sparsity problem needs density_target in (0, 1] and positive epochs, samples, batch_size")
            }
            _ => {}
        }
        match self.scheme {
            SchemeConfig::Penalized { c, .. } if !(c >= 0.0) => return bad("scheme.c must be nonnegative"),
            SchemeConfig::Augmented { c } if !(c >= 0.0) => return bad("scheme.c must be nonnegative"),
            SchemeConfig::Augmented { .. } | SchemeConfig::Proxy {} if matches!(self.problem, ProblemConfig::Sparsity { .. }) => {
                return bad("sparsity runs support the penalized and lagrangian schemes")
            }
            _ => {}
        }
        if self.command == Command::Sweep && self.sweep.values.is_empty() {
            return bad("sweep.values must not be empty");
        }
        if self.command == Command::Sweep && self.sweep.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("sweep.values must be finite and nonnegative");
        }
        if self.command == Command::Certify && self.candidate.is_none() {
            return bad("certify needs a candidate file (--candidate or \"candidate\")");
        }
        if self.command == Command::Bisect && !self.bisect.stub && !matches!(self.problem, ProblemConfig::Sparsity { .. }) {
            return bad("live bisection runs on the sparsity problem; use --stub to replay");
        }
        Ok(())
    }
}
