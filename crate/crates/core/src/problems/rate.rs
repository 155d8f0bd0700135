use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::mixture::Dataset;
use crate::error::{Error, Result};
use crate::model::{ConstrainedProblem, ConstraintLevels, Domain, Evaluation};
use crate::scalar::{sigmoid, softplus, Scalar};

/// Which constraint function a [`RateProblem`] exposes through
/// [`ConstrainedProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateConstraint {
    /// `rho - mean[1(w.x + b <= 0)]`; piecewise constant, zero Jacobian.
    True,
    /// `rho - mean[1 - sigmoid(w.x + b)]`; smooth.
    Surrogate,
}

/// Linear classifier `(w1, w2, b)` trained with mean binary cross-entropy,
/// constrained to predict class 0 for at least a fraction `rho` of the data.
#[derive(Debug, Clone)]
pub struct RateProblem<T: Scalar> {
    data: Arc<Dataset<T>>,
    target_rate: T,
    constraint: RateConstraint,
    levels: ConstraintLevels<T>,
    domain: Domain<T>,
}

/// Everything the rate schemes need from one pass over the data.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEvaluation<T: Scalar> {
    pub loss: T,
    pub grad_loss: DVector<T>,
    /// Fraction predicted as class 0 under the `w.x + b <= 0` rule.
    pub true_rate: T,
    /// `mean[1 - sigmoid(w.x + b)]`.
    pub surrogate_rate: T,
    /// Gradient of the surrogate constraint `rho - surrogate_rate`.
    pub grad_surrogate_constraint: DVector<T>,
    pub accuracy: T,
}

impl<T: Scalar> RateProblem<T> {
    pub fn new(data: Dataset<T>, target_rate: T) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::contract("rate problem needs a nonempty dataset"));
        }
        if !(target_rate >= T::zero() && target_rate <= T::one()) {
            return Err(Error::contract("target rate must lie in [0, 1]"));
        }
        Ok(Self {
            data: Arc::new(data),
            target_rate,
            constraint: RateConstraint::Surrogate,
            levels: ConstraintLevels::new(vec![T::zero()], vec![]),
            domain: Domain::unbounded(3),
        })
    }

    /// Same data and target, different constraint routing. Shares the dataset.
    pub fn with_constraint(&self, constraint: RateConstraint) -> Self {
        Self {
            constraint,
            ..self.clone()
        }
    }

    pub fn constraint(&self) -> RateConstraint {
        self.constraint
    }

    pub fn target_rate(&self) -> T {
        self.target_rate
    }

    pub fn dataset(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn initial_point() -> DVector<T> {
        DVector::zeros(3)
    }
}

/// Objective, both constraint readings, and accuracy at `params = (w1, w2, b)`.
pub fn rate_eval<T: Scalar>(problem: &RateProblem<T>, params: &DVector<T>) -> Result<RateEvaluation<T>> {
    if params.len() != 3 {
        return Err(Error::contract("rate parameters are (w1, w2, b)"));
    }
    let data = problem.dataset();
    let n = T::from_usize_lossy(data.len());
    let (w1, w2, b) = (params[0], params[1], params[2]);
    let mut loss = T::zero();
    let mut grad_loss = DVector::zeros(3);
    let mut class0 = 0usize;
    let mut correct = 0usize;
    let mut surrogate = T::zero();
    let mut grad_sur = DVector::zeros(3);
    for (p, &label) in data.points.iter().zip(&data.labels) {
        let z = w1 * p[0] + w2 * p[1] + b;
        let s = sigmoid(z);
        let y = if label == 1 { T::one() } else { T::zero() };
        // softplus(z) - y z is the cross-entropy of sigmoid(z) against y.
        loss += softplus(z) - y * z;
        let r = s - y;
        let ds = s * (T::one() - s);
        let feat = [p[0], p[1], T::one()];
        for k in 0..3 {
            grad_loss[k] += r * feat[k];
            grad_sur[k] += ds * feat[k];
        }
        surrogate += T::one() - s;
        let predicted_zero = z <= T::zero();
        if predicted_zero {
            class0 += 1;
        }
        if predicted_zero == (label == 0) {
            correct += 1;
        }
    }
    Ok(RateEvaluation {
        loss: loss / n,
        grad_loss: grad_loss / n,
        true_rate: T::from_usize_lossy(class0) / n,
        surrogate_rate: surrogate / n,
        grad_surrogate_constraint: grad_sur / n,
        accuracy: T::from_usize_lossy(correct) / n,
    })
}

impl<T: Scalar> ConstrainedProblem<T> for RateProblem<T> {
    fn dim(&self) -> usize {
        3
    }

    fn num_ineq(&self) -> usize {
        1
    }

    fn num_eq(&self) -> usize {
        0
    }

    fn levels(&self) -> &ConstraintLevels<T> {
        &self.levels
    }

    fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    fn eval(&self, x: &DVector<T>) -> Result<Evaluation<T>> {
        let r = rate_eval(self, x)?;
        let (g, jac) = match self.constraint {
            RateConstraint::True => (self.target_rate - r.true_rate, DMatrix::zeros(1, 3)),
            RateConstraint::Surrogate => (
                self.target_rate - r.surrogate_rate,
                DMatrix::from_row_slice(1, 3, r.grad_surrogate_constraint.as_slice()),
            ),
        };
        Ok(Evaluation {
            f: r.loss,
            g: DVector::from_vec(vec![g]),
            h: DVector::zeros(0),
            grad_f: r.grad_loss,
            jac_g: jac,
            jac_h: DMatrix::zeros(0, 3),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(point: [f64; 2], label: u8) -> RateProblem<f64> {
        RateProblem::new(Dataset::new(vec![point], vec![label]).unwrap(), 0.7).unwrap()
    }

    #[test]
    fn single_point_negative_logit() {
        let p = single([1.0, 0.0], 0);
        // w.x + b = -2
        let r = rate_eval(&p, &DVector::from_vec(vec![-1.0, 0.0, -1.0])).unwrap();
        assert_eq!(r.true_rate, 1.0);
        assert!((r.surrogate_rate - 0.880797).abs() < 1e-6);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn zero_parameters_tie_goes_to_class_zero() {
        let p = single([0.3, -0.4], 1);
        let r = rate_eval(&p, &RateProblem::initial_point()).unwrap();
        assert_eq!(r.surrogate_rate, 0.5);
        assert_eq!(r.true_rate, 1.0);
        assert!((r.loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn constraint_routing() {
        let p = single([1.0, 0.0], 0);
        let x = DVector::from_vec(vec![0.5, 0.0, 0.0]);
        let t = p.with_constraint(RateConstraint::True).eval(&x).unwrap();
        assert!((t.g[0] - 0.7).abs() < 1e-15); // true rate 0
        assert!(t.jac_g.iter().all(|&v| v == 0.0));
        let s = p.eval(&x).unwrap();
        assert!((s.g[0] - (0.7 - (1.0 - sigmoid(0.5)))).abs() < 1e-15);
        assert_eq!(s.f, t.f);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let d = Dataset::<f64>::new(vec![], vec![]).unwrap();
        assert!(RateProblem::new(d, 0.7).is_err());
    }
}
