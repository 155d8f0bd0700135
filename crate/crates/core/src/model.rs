//! Constrained-problem abstraction, Lagrangian and penalized evaluations, and
//! the violation / feasibility primitives every solver shares.
//!
//! A problem is `min f(x)` subject to `g(x) <= eps_g`, `h(x) = eps_h` and
//! `x` in a box-shaped domain. Evaluators hand back values and first
//! derivatives together; second derivatives are never supplied analytically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default absolute tolerance used by [`feasible`] when callers have no
/// stronger requirement.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

pub type PrimalPoint<T> = DVector<T>;

/// Per-coordinate box domain. Infinite bounds mean the coordinate is free.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T: Scalar> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> Domain<T> {
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![T::neg_infinity(); dim],
            upper: vec![T::infinity(); dim],
        }
    }

    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::contract("domain bound lengths differ"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::contract("domain lower bound exceeds upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    /// Clamp into the box. Idempotent: clamping an in-box value returns it
    /// unchanged bit for bit.
    pub fn project(&self, x: &mut DVector<T>) {
        for (i, xi) in x.iter_mut().enumerate() {
            if *xi < self.lower[i] {
                *xi = self.lower[i];
            } else if *xi > self.upper[i] {
                *xi = self.upper[i];
            }
        }
    }

    pub fn contains(&self, x: &DVector<T>) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(i, &xi)| xi >= self.lower[i] && xi <= self.upper[i])
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().any(|l| l.is_finite()) || self.upper.iter().any(|u| u.is_finite())
    }
}

/// Constraint levels `eps_g` and `eps_h`, in the units of `g` and `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintLevels<T: Scalar> {
    pub eps_g: DVector<T>,
    pub eps_h: DVector<T>,
}

impl<T: Scalar> ConstraintLevels<T> {
    pub fn new(eps_g: Vec<T>, eps_h: Vec<T>) -> Self {
        Self {
            eps_g: DVector::from_vec(eps_g),
            eps_h: DVector::from_vec(eps_h),
        }
    }

    pub fn none() -> Self {
        Self::new(Vec::new(), Vec::new())
    }
}

/// Objective, constraints and their first derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T: Scalar> {
    pub f: T,
    pub g: DVector<T>,
    pub h: DVector<T>,
    pub grad_f: DVector<T>,
    /// `m x d`, row `i` is the gradient of `g_i`.
    pub jac_g: DMatrix<T>,
    /// `n x d`, row `j` is the gradient of `h_j`.
    pub jac_h: DMatrix<T>,
}

impl<T: Scalar> Evaluation<T> {
    pub fn dim(&self) -> usize {
        self.grad_f.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.g.len()
    }

    pub fn num_eq(&self) -> usize {
        self.h.len()
    }

    /// Returns the first non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        if !self.f.is_finite() {
            return Some("f".into());
        }
        let blocks: [(&str, &[T]); 5] = [
            ("g", self.g.as_slice()),
            ("h", self.h.as_slice()),
            ("grad_f", self.grad_f.as_slice()),
            ("jac_g", self.jac_g.as_slice()),
            ("jac_h", self.jac_h.as_slice()),
        ];
        for (name, values) in blocks {
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Some(format!("{name}[{i}]"));
            }
        }
        None
    }

    fn check_shapes(&self, d: usize, m: usize, n: usize) -> Result<()> {
        let ok = self.grad_f.len() == d
            && self.g.len() == m
            && self.h.len() == n
            && self.jac_g.shape() == (m, d)
            && self.jac_h.shape() == (n, d);
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "evaluation shapes do not match problem (d={d}, m={m}, n={n})"
            )))
        }
    }
}

/// A constrained problem with analytic first derivatives.
///
/// Implementors must be immutable after construction so one instance can be
/// shared by concurrent runs.
pub trait ConstrainedProblem<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn num_ineq(&self) -> usize;
    fn num_eq(&self) -> usize;
    fn levels(&self) -> &ConstraintLevels<T>;
    fn domain(&self) -> &Domain<T>;

    /// Raw evaluator. Use [`evaluate`] to get shape and finiteness checks.
    fn eval(&self, x: &DVector<T>) -> Result<Evaluation<T>>;

    fn project(&self, x: &mut DVector<T>) {
        self.domain().project(x);
    }
}

/// Evaluate `problem` at `x`, rejecting wrong shapes and non-finite output.
pub fn evaluate<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    x: &DVector<T>,
) -> Result<Evaluation<T>> {
    if x.len() != problem.dim() {
        return Err(Error::contract(format!(
            "point has length {}, problem dimension is {}",
            x.len(),
            problem.dim()
        )));
    }
    let eval = problem.eval(x)?;
    eval.check_shapes(problem.dim(), problem.num_ineq(), problem.num_eq())?;
    match eval.first_non_finite() {
        Some(component) => Err(Error::evaluation(component)),
        None => Ok(eval),
    }
}

/// `g - eps_g` and `h - eps_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationVector<T: Scalar> {
    pub viol_g: DVector<T>,
    pub viol_h: DVector<T>,
}

impl<T: Scalar> ViolationVector<T> {
    /// Largest violation: `max(viol_g)` and `max |viol_h|`, floored at zero.
    pub fn max_violation(&self) -> T {
        let g = self.viol_g.iter().fold(T::zero(), |acc, &v| acc.max(v));
        self.viol_h.iter().fold(g, |acc, &v| acc.max(v.abs()))
    }
}

/// Multipliers plus the controller memory used by PI-style dual updates.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState<T: Scalar> {
    pub lambda: DVector<T>,
    pub mu: DVector<T>,
    pub prev_error_g: DVector<T>,
    pub prev_error_h: DVector<T>,
    pub initialized: bool,
}

impl<T: Scalar> DualState<T> {
    /// Zero multipliers, empty controller memory.
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            lambda: DVector::zeros(m),
            mu: DVector::zeros(n),
            prev_error_g: DVector::zeros(m),
            prev_error_h: DVector::zeros(n),
            initialized: false,
        }
    }

    pub fn with_multipliers(lambda: Vec<T>, mu: Vec<T>) -> Result<Self> {
        if lambda.iter().any(|&l| l < T::zero()) {
            return Err(Error::contract("inequality multipliers must be nonnegative"));
        }
        let mut dual = Self::zeros(lambda.len(), mu.len());
        dual.lambda = DVector::from_vec(lambda);
        dual.mu = DVector::from_vec(mu);
        Ok(dual)
    }

    pub fn num_ineq(&self) -> usize {
        self.lambda.len()
    }

    pub fn num_eq(&self) -> usize {
        self.mu.len()
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::contract(format!("{what}: length {got}, expected {want}")))
    }
}

pub fn violations<T: Scalar>(
    eval: &Evaluation<T>,
    levels: &ConstraintLevels<T>,
) -> Result<ViolationVector<T>> {
    check_len("eps_g", levels.eps_g.len(), eval.num_ineq())?;
    check_len("eps_h", levels.eps_h.len(), eval.num_eq())?;
    Ok(ViolationVector {
        viol_g: &eval.g - &levels.eps_g,
        viol_h: &eval.h - &levels.eps_h,
    })
}

/// `max(g - eps_g) <= tol` and `max |h - eps_h| <= tol`. Empty blocks are
/// vacuously satisfied. A negative `tol` is treated as zero.
pub fn feasible<T: Scalar>(
    eval: &Evaluation<T>,
    levels: &ConstraintLevels<T>,
    tol: T,
) -> Result<bool> {
    let tol = tol.max(T::zero());
    let viol = violations(eval, levels)?;
    Ok(viol.viol_g.iter().all(|&v| v <= tol) && viol.viol_h.iter().all(|&v| v.abs() <= tol))
}

/// `f + lambda^T (g - eps_g) + mu^T (h - eps_h)`.
pub fn lagrangian_value<T: Scalar>(
    eval: &Evaluation<T>,
    dual: &DualState<T>,
    levels: &ConstraintLevels<T>,
) -> Result<T> {
    check_len("lambda", dual.num_ineq(), eval.num_ineq())?;
    check_len("mu", dual.num_eq(), eval.num_eq())?;
    let viol = violations(eval, levels)?;
    Ok(eval.f + dual.lambda.dot(&viol.viol_g) + dual.mu.dot(&viol.viol_h))
}

/// `f + c_g^T g + c_h^T h`. No level offsets: the levels only shift the value
/// by a constant.
pub fn penalized_value<T: Scalar>(eval: &Evaluation<T>, c_g: &[T], c_h: &[T]) -> Result<T> {
    check_len("c_g", c_g.len(), eval.num_ineq())?;
    check_len("c_h", c_h.len(), eval.num_eq())?;
    if c_g.iter().any(|&c| c < T::zero()) {
        return Err(Error::contract("penalty coefficients on inequalities must be nonnegative"));
    }
    let pen_g: T = c_g.iter().zip(eval.g.iter()).map(|(&c, &g)| c * g).sum();
    let pen_h: T = c_h.iter().zip(eval.h.iter()).map(|(&c, &h)| c * h).sum();
    Ok(eval.f + pen_g + pen_h)
}

/// `grad_f + J_g^T w_g + J_h^T w_h` for arbitrary constraint weights. Every
/// primal direction in the crate (Lagrangian, penalized, augmented, proxy) is
/// an instance of this.
pub fn weighted_gradient<T: Scalar>(
    grad_f: &DVector<T>,
    jac_g: &DMatrix<T>,
    w_g: &DVector<T>,
    jac_h: &DMatrix<T>,
    w_h: &DVector<T>,
) -> Result<DVector<T>> {
    check_len("constraint weights (g)", w_g.len(), jac_g.nrows())?;
    check_len("constraint weights (h)", w_h.len(), jac_h.nrows())?;
    let mut grad = grad_f.clone();
    if !w_g.is_empty() {
        grad += jac_g.tr_mul(w_g);
    }
    if !w_h.is_empty() {
        grad += jac_h.tr_mul(w_h);
    }
    Ok(grad)
}

/// `grad_f + lambda^T grad_g + mu^T grad_h`, the primal direction of
/// gradient descent on the Lagrangian.
pub fn lagrangian_grad_x<T: Scalar>(
    eval: &Evaluation<T>,
    dual: &DualState<T>,
) -> Result<DVector<T>> {
    weighted_gradient(&eval.grad_f, &eval.jac_g, &dual.lambda, &eval.jac_h, &dual.mu)
}

/// Zero the gradient components whose descent direction leaves the domain at
/// an active bound (`|x_i - bound| <= tol_active`).
pub fn project_gradient<T: Scalar>(
    grad: &DVector<T>,
    x: &DVector<T>,
    domain: &Domain<T>,
    tol_active: T,
) -> DVector<T> {
    let mut out = grad.clone();
    for i in 0..out.len() {
        let at_lower = (x[i] - domain.lower()[i]) <= tol_active;
        let at_upper = (domain.upper()[i] - x[i]) <= tol_active;
        if (at_lower && out[i] > T::zero()) || (at_upper && out[i] < T::zero()) {
            out[i] = T::zero();
        }
    }
    out
}

/// Infinity norm; zero for empty vectors.
pub fn inf_norm<T: Scalar>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}
