use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fmt::sig6;
use crate::model::{evaluate, project_gradient, violations, ConstrainedProblem, DualState, Evaluation};
use crate::scalar::Scalar;

/// Largest primal dimension for which a dense finite-difference Hessian is built.
pub const MAX_SECOND_ORDER_DIM: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktTolerances {
    pub feas: f64,
    pub stat: f64,
    pub comp_slack: f64,
    pub active: f64,
    pub fd_step: f64,
}

impl Default for KktTolerances {
    fn default() -> Self {
        Self {
            feas: 1e-6,
            stat: 1e-5,
            comp_slack: 1e-6,
            active: 1e-6,
            fd_step: 1e-5,
        }
    }
}

impl KktTolerances {
    fn validate(&self) -> Result<()> {
        let all = [self.feas, self.stat, self.comp_slack, self.active, self.fd_step];
        if all.iter().all(|&t| t > 0.0) {
            Ok(())
        } else {
            Err(Error::contract("KKT tolerances must be positive"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrderVerdict {
    Pass,
    Fail,
    Skipped,
}

impl SecondOrderVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderReport {
    pub verdict: SecondOrderVerdict,
    /// Smallest eigenvalue of the Hessian restricted to the null space of the
    /// strongly active constraints; `None` when skipped or the space is `{0}`.
    pub min_eigenvalue: Option<f64>,
    pub null_space_dim: usize,
    /// `max |H - H^T|` of the raw finite-difference Hessian.
    pub hessian_asymmetry: Option<f64>,
}

impl SecondOrderReport {
    fn skipped() -> Self {
        Self {
            verdict: SecondOrderVerdict::Skipped,
            min_eigenvalue: None,
            null_space_dim: 0,
            hessian_asymmetry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub feasible: bool,
    pub max_violation: f64,
    /// Infinity norm of the domain-projected Lagrangian gradient.
    pub stationarity_residual: f64,
    /// `max_i |lambda_i (g_i - eps_i)|`.
    pub comp_slack: f64,
    pub dual_sign_ok: bool,
    pub first_order_pass: bool,
    pub second_order: SecondOrderReport,
}

impl KktReport {
    /// First order holds and second order did not fail.
    pub fn passed(&self) -> bool {
        self.first_order_pass && self.second_order.verdict != SecondOrderVerdict::Fail
    }

    /// Flat `key = value` block.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map(sig6).unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let _ = writeln!(s, "feasible = {}", self.feasible);
        let _ = writeln!(s, "max_violation = {}", sig6(self.max_violation));
        let _ = writeln!(s, "stationarity_residual = {}", sig6(self.stationarity_residual));
        let _ = writeln!(s, "comp_slack = {}", sig6(self.comp_slack));
        let _ = writeln!(s, "dual_sign_ok = {}", self.dual_sign_ok);
        let _ = writeln!(s, "first_order = {}", if self.first_order_pass { "pass" } else { "fail" });
        let _ = writeln!(s, "second_order = {}", self.second_order.verdict.as_str());
        let _ = writeln!(s, "min_projected_eigenvalue = {}", opt(self.second_order.min_eigenvalue));
        let _ = writeln!(s, "null_space_dim = {}", self.second_order.null_space_dim);
        let _ = writeln!(s, "verdict = {}", if self.passed() { "pass" } else { "fail" });
        s
    }

    pub fn csv_header() -> [&'static str; 9] {
        [
            "feasible",
            "max_violation",
            "stationarity_residual",
            "comp_slack",
            "dual_sign_ok",
            "first_order",
            "second_order",
            "min_projected_eigenvalue",
            "verdict",
        ]
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            (self.feasible as u8).to_string(),
            sig6(self.max_violation),
            sig6(self.stationarity_residual),
            sig6(self.comp_slack),
            (self.dual_sign_ok as u8).to_string(),
            if self.first_order_pass { "pass" } else { "fail" }.into(),
            self.second_order.verdict.as_str().into(),
            self.second_order.min_eigenvalue.map(sig6).unwrap_or_default(),
            if self.passed() { "pass" } else { "fail" }.into(),
        ]
    }
}

fn dual_from<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    x: &DVector<T>,
    lambda: &[T],
    mu: &[T],
) -> Result<DualState<T>> {
    if x.len() != problem.dim() || lambda.len() != problem.num_ineq() || mu.len() != problem.num_eq() {
        return Err(Error::contract(format!(
            "candidate shapes (x: {}, lambda: {}, mu: {}) do not match problem (d={}, m={}, n={})",
            x.len(),
            lambda.len(),
            mu.len(),
            problem.dim(),
            problem.num_ineq(),
            problem.num_eq()
        )));
    }
    let mut dual = DualState::zeros(lambda.len(), mu.len());
    dual.lambda = DVector::from_row_slice(lambda);
    dual.mu = DVector::from_row_slice(mu);
    Ok(dual)
}

fn lagrangian_gradient<T: Scalar>(eval: &Evaluation<T>, dual: &DualState<T>) -> DVector<f64> {
    let g = crate::model::lagrangian_grad_x(eval, dual).expect("shapes checked by caller");
    g.map(|v| v.to_f64_lossy())
}

/// First-order KKT check: feasibility, stationarity of the Lagrangian (on the
/// gradient projected at active domain bounds), complementary slackness and
/// dual sign. The second-order field is left as skipped.
pub fn kkt_first_order<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    x: &DVector<T>,
    lambda: &[T],
    mu: &[T],
    tol: &KktTolerances,
) -> Result<KktReport> {
    tol.validate()?;
    let dual = dual_from(problem, x, lambda, mu)?;
    let eval = evaluate(problem, x)?;
    let viol = violations(&eval, problem.levels())?;
    let max_violation = viol.max_violation().to_f64_lossy();
    let grad = crate::model::lagrangian_grad_x(&eval, &dual)?;
    let projected = project_gradient(&grad, x, problem.domain(), T::lit(tol.active));
    let stationarity_residual = crate::model::inf_norm(&projected).to_f64_lossy();
    let comp_slack = dual
        .lambda
        .iter()
        .zip(viol.viol_g.iter())
        .map(|(&l, &v)| (l * v).abs().to_f64_lossy())
        .fold(0.0, f64::max);
    let dual_sign_ok = dual.lambda.iter().all(|&l| l >= T::zero());
    let feasible = max_violation <= tol.feas;
    let first_order_pass =
        feasible && stationarity_residual <= tol.stat && comp_slack <= tol.comp_slack && dual_sign_ok;
    Ok(KktReport {
        feasible,
        max_violation,
        stationarity_residual,
        comp_slack,
        dual_sign_ok,
        first_order_pass,
        second_order: SecondOrderReport::skipped(),
    })
}

/// Central-difference Hessian of `x -> grad_x L(x, lambda, mu)`, falling back
/// to a one-sided difference along coordinates where a step would leave the
/// domain. Returns the symmetrized Hessian and the raw asymmetry.
pub fn fd_lagrangian_hessian<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    x: &DVector<T>,
    lambda: &[T],
    mu: &[T],
    step: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let dual = dual_from(problem, x, lambda, mu)?;
    let d = x.len();
    let grad_at = |p: &DVector<T>| -> Result<DVector<f64>> {
        Ok(lagrangian_gradient(&evaluate(problem, p)?, &dual))
    };
    let base = grad_at(x)?;
    let h = T::lit(step);
    let mut hess = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut plus = x.clone();
        plus[j] += h;
        let mut minus = x.clone();
        minus[j] -= h;
        let dom = problem.domain();
        let up_ok = plus[j] <= dom.upper()[j];
        let down_ok = minus[j] >= dom.lower()[j];
        let column = match (up_ok, down_ok) {
            (true, true) => {
                let hh = (plus[j] - minus[j]).to_f64_lossy();
                (grad_at(&plus)? - grad_at(&minus)?) / hh
            }
            (true, false) => (grad_at(&plus)? - &base) / (plus[j] - x[j]).to_f64_lossy(),
            (false, true) => (&base - grad_at(&minus)?) / (x[j] - minus[j]).to_f64_lossy(),
            (false, false) => {
                return Err(Error::contract(format!(
                    "domain too narrow for a finite-difference step along coordinate {j}"
                )))
            }
        };
        hess.set_column(j, &column);
    }
    let asym = (&hess - hess.transpose()).amax();
    let sym = (&hess + hess.transpose()) * 0.5;
    Ok((sym, asym))
}

/// Second-order sufficient condition: the Lagrangian Hessian restricted to the
/// null space of the strongly active constraints must be positive definite.
///
/// Strongly active means active within `tol.active` with a multiplier above
/// `tol.active`: inequality rows use `lambda_i`; domain bounds use the implied
/// bound multiplier, i.e. the Lagrangian gradient component pushing outward.
/// Equality rows are always included. Skipped for `d > 50`.
pub fn kkt_second_order<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    x: &DVector<T>,
    lambda: &[T],
    mu: &[T],
    tol: &KktTolerances,
) -> Result<SecondOrderReport> {
    tol.validate()?;
    let dual = dual_from(problem, x, lambda, mu)?;
    let d = x.len();
    if d > MAX_SECOND_ORDER_DIM {
        return Ok(SecondOrderReport::skipped());
    }
    let eval = evaluate(problem, x)?;
    let viol = violations(&eval, problem.levels())?;
    let grad = lagrangian_gradient(&eval, &dual);

    let mut rows: Vec<DVector<f64>> = Vec::new();
    for i in 0..eval.num_ineq() {
        let active = viol.viol_g[i].to_f64_lossy().abs() <= tol.active;
        if active && dual.lambda[i].to_f64_lossy() > tol.active {
            rows.push(eval.jac_g.row(i).transpose().map(|v| v.to_f64_lossy()));
        }
    }
    for j in 0..eval.num_eq() {
        rows.push(eval.jac_h.row(j).transpose().map(|v| v.to_f64_lossy()));
    }
    let dom = problem.domain();
    for i in 0..d {
        let xi = x[i].to_f64_lossy();
        let at_lower = xi - dom.lower()[i].to_f64_lossy() <= tol.active;
        let at_upper = dom.upper()[i].to_f64_lossy() - xi <= tol.active;
        if (at_lower && grad[i] > tol.active) || (at_upper && grad[i] < -tol.active) {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            rows.push(e);
        }
    }

    let basis = null_space(&rows, d);
    let (hess, asym) = fd_lagrangian_hessian(problem, x, lambda, mu, tol.fd_step)?;
    let k = basis.ncols();
    if k == 0 {
        return Ok(SecondOrderReport {
            verdict: SecondOrderVerdict::Pass,
            min_eigenvalue: None,
            null_space_dim: 0,
            hessian_asymmetry: Some(asym),
        });
    }
    let reduced = basis.transpose() * &hess * &basis;
    let eig = SymmetricEigen::new(reduced);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SecondOrderReport {
        verdict: if min > 0.0 {
            SecondOrderVerdict::Pass
        } else {
            SecondOrderVerdict::Fail
        },
        min_eigenvalue: Some(min),
        null_space_dim: k,
        hessian_asymmetry: Some(asym),
    })
}

/// Orthonormal basis (as columns) of `{v : a^T v = 0 for every row a}`.
fn null_space(rows: &[DVector<f64>], d: usize) -> DMatrix<f64> {
    if rows.is_empty() {
        return DMatrix::identity(d, d);
    }
    let mut gram = DMatrix::zeros(d, d);
    for a in rows {
        gram += a * a.transpose();
    }
    let eig = SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &ev)| ev <= 1e-12 * scale)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// First- and second-order certificate in one report.
pub fn certify<T: Scalar, P: ConstrainedProblem<T> + ?Sized>(
    problem: &P,
    x: &DVector<T>,
    lambda: &[T],
    mu: &[T],
    tol: &KktTolerances,
) -> Result<KktReport> {
    let mut report = kkt_first_order(problem, x, lambda, mu, tol)?;
    report.second_order = kkt_second_order(problem, x, lambda, mu, tol)?;
    Ok(report)
}
