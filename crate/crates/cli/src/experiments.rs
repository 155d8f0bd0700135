//! Builds problems and runs from a resolved [`RunConfig`].

use std::path::Path;

use lagrangekit::optimizers::{run, DualOptConfig, PrimalOptConfig, RunOptions, Scheme, Trace};
use lagrangekit::problems::{
    make_gaussian_mixture, rate_eval, Concave2D, ConvexQuad, GaussianMixtureSpec, RateConstraint, RateProblem,
};
use lagrangekit::tuner::ProbeOutcome;
use lagrangekit::ConstrainedProblem;
use lagrangekit_smallnet::data::{find_digit_files, load_idx_pair};
use lagrangekit_smallnet::{benchmark_split, train, DenseNetSpec, Formulation, ImageSet, TrainConfig, Trained};
use nalgebra::DVector;

use crate::config::{DualKind, PrimalKind, ProblemConfig, RunConfig, SchemeConfig};
use crate::error::CliError;

/// Held-out images taken after the training block of a real digit file.
pub const HELD_OUT: usize = 1000;

pub enum Built {
    Concave(Concave2D<f64>),
    Quad(ConvexQuad<f64>),
    Rate { truth: RateProblem<f64>, surrogate: RateProblem<f64> },
}

impl Built {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(match &cfg.problem {
            ProblemConfig::Concave2d { eps } => Built::Concave(Concave2D::new(*eps)?),
            ProblemConfig::Convexquad {} => Built::Quad(ConvexQuad::new()),
            ProblemConfig::Rate { target_rate, n_per_class, mean_separation, std } => {
                let spec = GaussianMixtureSpec {
                    mean_separation: *mean_separation,
                    std: *std,
                    n_per_class: *n_per_class,
                    seed: cfg.seed,
                };
                let data = make_gaussian_mixture(&spec).map_err(CliError::runtime)?;
                let truth = RateProblem::new(data, *target_rate)?.with_constraint(RateConstraint::True);
                let surrogate = truth.with_constraint(RateConstraint::Surrogate);
                Built::Rate { truth, surrogate }
            }
            ProblemConfig::Sparsity { .. } => {
                return Err(CliError::Invalid("the sparsity problem has no iterate trace; use sweep or bisect".into()))
            }
        })
    }

    /// The differentiable problem: what the Lagrangian, penalized and
    /// augmented schemes optimize and what certification checks.
    pub fn smooth(&self) -> &dyn ConstrainedProblem<f64> {
        match self {
            Built::Concave(p) => p,
            Built::Quad(p) => p,
            Built::Rate { surrogate, .. } => surrogate,
        }
    }

    pub fn initial_point(&self) -> DVector<f64> {
        match self {
            Built::Concave(_) => Concave2D::initial_point(),
            Built::Quad(_) => ConvexQuad::initial_point(),
            Built::Rate { .. } => RateProblem::initial_point(),
        }
    }
}

pub fn primal_config(cfg: &RunConfig) -> PrimalOptConfig<f64> {
    match cfg.primal.kind {
        PrimalKind::Gd => PrimalOptConfig::gd(cfg.primal.step_size),
        PrimalKind::Adam => PrimalOptConfig::adam(cfg.primal.step_size),
    }
}

pub fn dual_config(cfg: &RunConfig, step: f64) -> DualOptConfig<f64> {
    let mut d = match cfg.dual.kind {
        DualKind::Ga => DualOptConfig::ga(step),
        DualKind::Nupi => DualOptConfig::nupi(step, cfg.dual.kappa_p),
    };
    d.nu = cfg.dual.nu;
    d
}

/// Check the optimizer settings before any run starts.
pub fn validate_optimizers(cfg: &RunConfig) -> Result<(), CliError> {
    primal_config(cfg).validate()?;
    if !matches!(cfg.scheme, SchemeConfig::Penalized { .. }) {
        dual_config(cfg, cfg.dual.step_size).validate()?;
    }
    Ok(())
}

/// One optimization with the scheme coefficient and dual step given
/// explicitly, so sweeps can vary either.
pub fn run_once(cfg: &RunConfig, built: &Built, scheme: &SchemeConfig, dual_step: f64) -> Result<Trace<f64>, CliError> {
    let smooth = built.smooth();
    let x0 = match &cfg.x0 {
        Some(v) if v.len() != smooth.dim() => {
            return Err(CliError::Invalid(format!("x0 has {} entries, the problem has {}", v.len(), smooth.dim())))
        }
        Some(v) => DVector::from_row_slice(v),
        None => built.initial_point(),
    };
    let opts = RunOptions {
        iterations: cfg.iterations,
        seed: cfg.seed,
        stride: cfg.stride,
        ..RunOptions::new(cfg.iterations)
    };
    let primal = primal_config(cfg);
    let dual = dual_config(cfg, dual_step);
    let m = vec![0.0; smooth.num_ineq()];
    let n = vec![0.0; smooth.num_eq()];
    let (c_g, c_h): (Vec<f64>, Vec<f64>) = match scheme {
        SchemeConfig::Penalized { c, c_h } => (m.iter().map(|_| *c).collect(), n.iter().map(|_| *c_h).collect()),
        _ => (m, n),
    };
    let trace = match (scheme, built) {
        (SchemeConfig::Proxy {}, Built::Rate { truth, surrogate }) => {
            run(truth, &Scheme::Proxy { surrogate }, x0, &primal, &dual, &opts)
        }
        (SchemeConfig::Proxy {}, _) => run(smooth, &Scheme::Proxy { surrogate: smooth }, x0, &primal, &dual, &opts),
        (SchemeConfig::Penalized { .. }, _) => {
            run(smooth, &Scheme::Penalized { c_g: &c_g, c_h: &c_h }, x0, &primal, &dual, &opts)
        }
        (SchemeConfig::Lagrangian {}, _) => run(smooth, &Scheme::Lagrangian, x0, &primal, &dual, &opts),
        (SchemeConfig::Augmented { c }, _) => run(smooth, &Scheme::Augmented { c: *c }, x0, &primal, &dual, &opts),
    };
    trace.map_err(CliError::from)
}

/// Class-0 rate and accuracy of a rate-problem iterate, both as fractions.
pub fn rate_metrics(built: &Built, x: &[f64]) -> Option<(f64, f64)> {
    match built {
        Built::Rate { truth, .. } => {
            let e = rate_eval(truth, &DVector::from_row_slice(x)).ok()?;
            Some((e.true_rate, e.accuracy))
        }
        _ => None,
    }
}

/// KKT stationarity residual of the smooth problem at a final record.
pub fn kkt_residual(built: &Built, x: &[f64], lambda: &[f64], mu: &[f64]) -> Result<f64, CliError> {
    let tol = lagrangekit::diagnostics::KktTolerances::default();
    let r = lagrangekit::diagnostics::kkt_first_order(built.smooth(), &DVector::from_row_slice(x), lambda, mu, &tol)?;
    Ok(r.stationarity_residual)
}

/// Training and held-out images for a sparsity run: IDX files when `data`
/// names a directory, the synthetic benchmark otherwise.
pub fn sparsity_data(data: Option<&Path>, samples: usize, seed: u64) -> Result<(ImageSet<f32>, ImageSet<f32>), CliError> {
    match data {
        Some(dir) => {
            let (img, lab) = find_digit_files(dir)
                .ok_or_else(|| CliError::Invalid(format!("no IDX training files in {}", dir.display())))?;
            let all: ImageSet<f32> = load_idx_pair(&img, &lab, Some(samples + HELD_OUT))?;
            if all.len() <= samples {
                return Err(CliError::Invalid(format!("{} images on disk, need more than {samples}", all.len())));
            }
            Ok((all.slice(0, samples)?, all.slice(samples, all.len())?))
        }
        None => {
            let (tr, te) = benchmark_split::<f32>(seed)?;
            let samples = samples.min(tr.len());
            Ok((tr.slice(0, samples)?, te))
        }
    }
}

/// Everything a sparsity training needs except the formulation.
pub struct SparsitySetup {
    pub train: ImageSet<f32>,
    pub test: ImageSet<f32>,
    pub base: TrainConfig<f32>,
    pub density_target: f64,
}

impl SparsitySetup {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let ProblemConfig::Sparsity { density_target, epochs, samples, batch_size, lr, gate_lr, data } = &cfg.problem else {
            return Err(CliError::Invalid("not a sparsity problem".into()));
        };
        let (train, test) = sparsity_data(data.as_deref(), *samples, cfg.seed)?;
        let mut base = TrainConfig::scaled_default(Formulation::Penalized { c: 0.0 });
        base.epochs = *epochs;
        base.batch_size = *batch_size;
        base.lr = *lr as f32;
        base.gate_lr = *gate_lr as f32;
        base.seed = cfg.seed;
        Ok(Self { train, test, base, density_target: *density_target })
    }

    pub fn train(&self, formulation: Formulation<f32>) -> lagrangekit::Result<Trained<f32>> {
        let cfg = TrainConfig { formulation, ..self.base.clone() };
        train(DenseNetSpec::scaled_default(), &self.train, &self.test, &cfg)
    }

    pub fn penalized(&self, c: f64) -> lagrangekit::Result<Trained<f32>> {
        self.train(Formulation::Penalized { c: c as f32 })
    }

    /// Density and accuracy in percent, the tuner's view of one training.
    pub fn probe(&self, c: f64) -> lagrangekit::Result<ProbeOutcome<f64>> {
        let t = self.penalized(c)?;
        Ok(ProbeOutcome {
            metric: 100.0 * t.report.density as f64,
            accuracy: Some(100.0 * t.report.accuracy as f64),
        })
    }
}

/// Penalty coefficient or dual multiplier seed for a scheme at sweep value `v`.
pub fn scheme_at(scheme: &SchemeConfig, axis_is_penalty: bool, v: f64) -> SchemeConfig {
    if !axis_is_penalty {
        return scheme.clone();
    }
    match scheme {
        SchemeConfig::Penalized { c_h, .. } => SchemeConfig::Penalized { c: v, c_h: *c_h },
        SchemeConfig::Augmented { .. } => SchemeConfig::Augmented { c: v },
        _ => SchemeConfig::Penalized { c: v, c_h: 0.0 },
    }
}
