use std::time::Instant;

use nalgebra::DVector;

use super::dual::{dual_update, DualOptConfig};
use super::primal::{PrimalOptConfig, PrimalOptimizer};
use super::trace::{RunMetadata, Trace, TraceRecord};
use crate::error::{Error, Result};
use crate::model::{
    evaluate, feasible, inf_norm, project_gradient, violations, weighted_gradient,
    ConstrainedProblem, DualState, Evaluation, DEFAULT_FEASIBILITY_TOL,
};
use crate::scalar::Scalar;

/// How the primal and dual variables are driven.
#[derive(Clone, Copy)]
pub enum Scheme<'a, T: Scalar> {
    /// Gradient descent on `f + c_g^T g + c_h^T h`; no dual variables.
    Penalized { c_g: &'a [T], c_h: &'a [T] },
    /// Alternating descent-ascent on the Lagrangian, dual step first.
    Lagrangian,
    /// Descent-ascent on the Lagrangian plus `(c/2)(|relu(g - eps_g)|^2 + |h - eps_h|^2)`.
    Augmented { c: T },
    /// Duals follow the problem's (possibly non-differentiable) constraints,
    /// the primal step uses the surrogate's Jacobians.
    Proxy { surrogate: &'a dyn ConstrainedProblem<T> },
}

impl<T: Scalar> Scheme<'_, T> {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Penalized { .. } => "penalized",
            Scheme::Lagrangian => "lagrangian",
            Scheme::Augmented { .. } => "augmented",
            Scheme::Proxy { .. } => "proxy",
        }
    }
}

/// Mutable per-run state: iterate, multipliers, optimizer memory, and the
/// cached evaluation at the current iterate.
#[derive(Debug, Clone)]
pub struct RunState<T: Scalar> {
    pub t: usize,
    pub x: DVector<T>,
    pub dual: DualState<T>,
    pub eval: Evaluation<T>,
    /// Surrogate evaluation at `x` (proxy scheme only).
    pub surrogate_eval: Option<Evaluation<T>>,
    pub primal: PrimalOptimizer<T>,
}

impl<T: Scalar> RunState<T> {
    /// Projects `x0`, evaluates it and zeroes the multipliers.
    pub fn new<P: ConstrainedProblem<T> + ?Sized>(
        problem: &P,
        mut x0: DVector<T>,
        primal_cfg: PrimalOptConfig<T>,
    ) -> Result<Self> {
        problem.project(&mut x0);
        let eval = evaluate(problem, &x0)?;
        Ok(Self {
            t: 0,
            dual: DualState::zeros(problem.num_ineq(), problem.num_eq()),
            primal: PrimalOptimizer::new(primal_cfg, problem.dim())?,
            x: x0,
            eval,
            surrogate_eval: None,
        })
    }

    fn advance<P: ConstrainedProblem<T> + ?Sized>(
        &mut self,
        problem: &P,
        grad: &DVector<T>,
    ) -> Result<()> {
        let mut next = self.primal.step(&self.x, grad);
        problem.project(&mut next);
        self.eval = evaluate(problem, &next)?;
        self.x = next;
        self.t += 1;
        Ok(())
    }
}

/// One alternating descent-ascent iteration: duals from `x_t`, then a primal
/// step on the Lagrangian at the new duals, then projection. Evaluates the
/// problem exactly once (at `x_{t+1}`).
pub fn gda_iteration<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    state: &mut RunState<T>,
    dual_cfg: &DualOptConfig<T>,
) -> Result<()> {
    let viol = violations(&state.eval, problem.levels())?;
    state.dual = dual_update(&state.dual, &viol, dual_cfg)?;
    let grad = weighted_gradient(
        &state.eval.grad_f,
        &state.eval.jac_g,
        &state.dual.lambda,
        &state.eval.jac_h,
        &state.dual.mu,
    )?;
    state.advance(problem, &grad)
}

/// One descent step on the penalized objective with fixed coefficients.
pub fn penalized_iteration<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    state: &mut RunState<T>,
    c_g: &[T],
    c_h: &[T],
) -> Result<()> {
    if c_g.iter().any(|&c| c < T::zero()) {
        return Err(Error::contract("penalty coefficients on inequalities must be nonnegative"));
    }
    let grad = weighted_gradient(
        &state.eval.grad_f,
        &state.eval.jac_g,
        &DVector::from_row_slice(c_g),
        &state.eval.jac_h,
        &DVector::from_row_slice(c_h),
    )?;
    state.advance(problem, &grad)
}

/// Augmented Lagrangian value:
/// `L + (c/2) |relu(g - eps_g)|^2 + (c/2) |h - eps_h|^2`.
pub fn augmented_value<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    eval: &Evaluation<T>,
    dual: &DualState<T>,
    c: T,
) -> Result<T> {
    let viol = violations(eval, problem.levels())?;
    let lag = crate::model::lagrangian_value(eval, dual, problem.levels())?;
    let half_c = c / T::lit(2.0);
    let sq_g: T = viol.viol_g.iter().map(|&v| v.max(T::zero()).powi(2)).sum();
    let sq_h: T = viol.viol_h.iter().map(|&v| v * v).sum();
    Ok(lag + half_c * sq_g + half_c * sq_h)
}

/// Descent-ascent on the Augmented Lagrangian. The dual update is unchanged;
/// the primal gradient gains `c relu(g - eps_g)^T grad g + c (h - eps_h)^T grad h`.
pub fn alm_iteration<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    state: &mut RunState<T>,
    dual_cfg: &DualOptConfig<T>,
    c: T,
) -> Result<()> {
    if c < T::zero() {
        return Err(Error::contract("augmented penalty coefficient must be nonnegative"));
    }
    let viol = violations(&state.eval, problem.levels())?;
    state.dual = dual_update(&state.dual, &viol, dual_cfg)?;
    let w_g = state
        .dual
        .lambda
        .zip_map(&viol.viol_g, |l, v| l + c * v.max(T::zero()));
    let w_h = state.dual.mu.zip_map(&viol.viol_h, |m, v| m + c * v);
    let grad = weighted_gradient(&state.eval.grad_f, &state.eval.jac_g, &w_g, &state.eval.jac_h, &w_h)?;
    state.advance(problem, &grad)
}

fn check_surrogate<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    surrogate: &dyn ConstrainedProblem<T>,
) -> Result<()> {
    let same = surrogate.dim() == problem.dim()
        && surrogate.num_ineq() == problem.num_ineq()
        && surrogate.num_eq() == problem.num_eq()
        && surrogate.levels() == problem.levels();
    if same {
        Ok(())
    } else {
        Err(Error::contract(
            "surrogate constraint block differs from the true one in shape or level",
        ))
    }
}

/// Proxy-constraint descent-ascent: dual step on the true violations, primal
/// step on `grad f + lambda^T grad g_surrogate + mu^T grad h_surrogate`.
pub fn proxy_gda_iteration<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    surrogate: &dyn ConstrainedProblem<T>,
    state: &mut RunState<T>,
    dual_cfg: &DualOptConfig<T>,
) -> Result<()> {
    check_surrogate(problem, surrogate)?;
    let sur = match state.surrogate_eval.take() {
        Some(e) => e,
        None => evaluate(surrogate, &state.x)?,
    };
    let viol = violations(&state.eval, problem.levels())?;
    state.dual = dual_update(&state.dual, &viol, dual_cfg)?;
    let grad = weighted_gradient(
        &state.eval.grad_f,
        &sur.jac_g,
        &state.dual.lambda,
        &sur.jac_h,
        &state.dual.mu,
    )?;
    state.advance(problem, &grad)?;
    state.surrogate_eval = Some(evaluate(surrogate, &state.x)?);
    Ok(())
}

/// Iteration budget and recording options for [`run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub iterations: usize,
    pub seed: u64,
    /// Record every `stride`-th iterate (the final iterate is always recorded).
    pub stride: usize,
    pub feasibility_tol: f64,
}

impl RunOptions {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            seed: 0,
            stride: 1,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
        }
    }
}

fn record<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    scheme: &Scheme<'_, T>,
    state: &RunState<T>,
    tol: T,
) -> Result<TraceRecord<T>> {
    // Multipliers shown for the penalized scheme are its fixed coefficients.
    let (lambda, mu) = match scheme {
        Scheme::Penalized { c_g, c_h } => (DVector::from_row_slice(c_g), DVector::from_row_slice(c_h)),
        _ => (state.dual.lambda.clone(), state.dual.mu.clone()),
    };
    let (jac_g, jac_h) = match (scheme, &state.surrogate_eval) {
        (Scheme::Proxy { .. }, Some(sur)) => (&sur.jac_g, &sur.jac_h),
        _ => (&state.eval.jac_g, &state.eval.jac_h),
    };
    let grad = weighted_gradient(&state.eval.grad_f, jac_g, &lambda, jac_h, &mu)?;
    let stationarity = inf_norm(&project_gradient(&grad, &state.x, problem.domain(), T::zero()));
    Ok(TraceRecord {
        t: state.t,
        x: state.x.iter().copied().collect(),
        f: state.eval.f,
        g: state.eval.g.iter().copied().collect(),
        h: state.eval.h.iter().copied().collect(),
        lambda: lambda.iter().copied().collect(),
        mu: mu.iter().copied().collect(),
        stationarity,
        feasible: feasible(&state.eval, problem.levels(), tol)?,
    })
}

/// Run `scheme` for `opts.iterations` iterations from `x0` (projected first).
/// Deterministic: the same inputs give a bitwise-identical trace. Running out
/// of budget is not an error; inspect the final record's feasibility.
pub fn run<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    scheme: &Scheme<'_, T>,
    x0: DVector<T>,
    primal_cfg: &PrimalOptConfig<T>,
    dual_cfg: &DualOptConfig<T>,
    opts: &RunOptions,
) -> Result<Trace<T>> {
    if opts.iterations == 0 {
        return Err(Error::contract("iteration budget must be at least 1"));
    }
    if opts.stride == 0 {
        return Err(Error::contract("trace stride must be at least 1"));
    }
    if !matches!(scheme, Scheme::Penalized { .. }) {
        dual_cfg.validate()?;
    }
    let started = Instant::now();
    let tol = T::lit(opts.feasibility_tol);
    let mut state = RunState::new(problem, x0, *primal_cfg)?;
    if let Scheme::Proxy { surrogate } = scheme {
        check_surrogate(problem, *surrogate)?;
        state.surrogate_eval = Some(evaluate(*surrogate, &state.x)?);
    }
    let mut records = vec![record(problem, scheme, &state, tol)?];
    for _ in 0..opts.iterations {
        match scheme {
            Scheme::Penalized { c_g, c_h } => penalized_iteration(problem, &mut state, c_g, c_h)?,
            Scheme::Lagrangian => gda_iteration(problem, &mut state, dual_cfg)?,
            Scheme::Augmented { c } => alm_iteration(problem, &mut state, dual_cfg, *c)?,
            Scheme::Proxy { surrogate } => {
                proxy_gda_iteration(problem, *surrogate, &mut state, dual_cfg)?
            }
        }
        if state.t % opts.stride == 0 || state.t == opts.iterations {
            records.push(record(problem, scheme, &state, tol)?);
        }
    }
    Ok(Trace {
        records,
        metadata: RunMetadata {
            seed: opts.seed,
            scheme: scheme.name().to_string(),
            primal: format!("{:?}", primal_cfg),
            dual: format!("{:?}", dual_cfg),
            iterations: opts.iterations,
            wall_time: started.elapsed(),
        },
    })
}
