use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{ConstrainedProblem, ConstraintLevels, Domain, Evaluation};
use crate::scalar::Scalar;

/// `min x^2  s.t.  1 - x <= 0`. Convex, with KKT point `(x, lambda) = (1, 2)`.
#[derive(Debug, Clone)]
pub struct ConvexQuad<T: Scalar> {
    levels: ConstraintLevels<T>,
    domain: Domain<T>,
}

impl<T: Scalar> Default for ConvexQuad<T> {
    fn default() -> Self {
        Self {
            levels: ConstraintLevels::new(vec![T::zero()], vec![]),
            domain: Domain::unbounded(1),
        }
    }
}

impl<T: Scalar> ConvexQuad<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn initial_point() -> DVector<T> {
        DVector::from_vec(vec![T::lit(3.0)])
    }

    pub fn solution() -> (T, T) {
        (T::one(), T::lit(2.0))
    }
}

pub fn convexquad_eval<T: Scalar>(x: T) -> Evaluation<T> {
    Evaluation {
        f: x * x,
        g: DVector::from_vec(vec![T::one() - x]),
        h: DVector::zeros(0),
        grad_f: DVector::from_vec(vec![x + x]),
        jac_g: DMatrix::from_element(1, 1, -T::one()),
        jac_h: DMatrix::zeros(0, 1),
    }
}

impl<T: Scalar> ConstrainedProblem<T> for ConvexQuad<T> {
    fn dim(&self) -> usize {
        1
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
        Ok(convexquad_eval(x[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lagrangian_grad_x, penalized_value, DualState};

    #[test]
    fn direct_substitution() {
        let e = convexquad_eval(3.0f64);
        assert_eq!((e.f, e.g[0]), (9.0, -2.0));
        let e = convexquad_eval(1.0f64);
        assert_eq!((e.f, e.g[0]), (1.0, 0.0));
    }

    #[test]
    fn kkt_point_is_stationary() {
        let e = convexquad_eval(1.0f64);
        let dual = DualState::with_multipliers(vec![2.0], vec![]).unwrap();
        assert_eq!(lagrangian_grad_x(&e, &dual).unwrap()[0], 0.0);
        assert_eq!(penalized_value(&e, &[2.0], &[]).unwrap(), 1.0);
    }
}
