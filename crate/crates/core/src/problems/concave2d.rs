use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ConstrainedProblem, ConstraintLevels, Domain, Evaluation};
use crate::scalar::Scalar;

/// `min (1 + y^2) cos x  s.t.  (1 + y^2) sin x <= eps`, `x in [0, pi/2]`.
///
/// Both functions are concave in `x` on the domain, so every fixed-weight
/// penalization is minimized at an endpoint while the constrained minimizer
/// sits strictly inside at `x = asin(eps)`.
#[derive(Debug, Clone)]
pub struct Concave2D<T: Scalar> {
    eps: T,
    levels: ConstraintLevels<T>,
    domain: Domain<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concave2DSolution<T> {
    pub x: T,
    pub y: T,
    pub lambda: T,
    pub f: T,
}

fn check_eps<T: Scalar>(eps: T) -> Result<()> {
    if eps > T::zero() && eps < T::one() {
        Ok(())
    } else {
        Err(Error::contract(format!("concave2d level must lie in (0, 1), got {eps}")))
    }
}

impl<T: Scalar> Concave2D<T> {
    pub fn new(eps: T) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self {
            eps,
            levels: ConstraintLevels::new(vec![eps], vec![]),
            domain: Domain::boxed(
                vec![T::zero(), T::neg_infinity()],
                vec![T::FRAC_PI_2(), T::infinity()],
            )?,
        })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// Interior start, off-axis in `y` so the `y` dynamics are exercised.
    pub fn initial_point() -> DVector<T> {
        DVector::from_vec(vec![T::FRAC_PI_4(), T::lit(0.1)])
    }

    pub fn solution(&self) -> Concave2DSolution<T> {
        concave2d_solution(self.eps).expect("eps validated at construction")
    }
}

/// Values and first derivatives at `(x, y)`; `x` must already be projected.
pub fn concave2d_eval<T: Scalar>(eps: T, x: T, y: T) -> Result<Evaluation<T>> {
    check_eps(eps)?;
    if !(x >= T::zero() && x <= T::FRAC_PI_2()) {
        return Err(Error::contract(format!("x = {x} outside [0, pi/2]")));
    }
    let s = T::one() + y * y;
    let (sin, cos) = x.sin_cos();
    let two_y = y + y;
    Ok(Evaluation {
        f: s * cos,
        g: DVector::from_vec(vec![s * sin]),
        h: DVector::zeros(0),
        grad_f: DVector::from_vec(vec![-s * sin, two_y * cos]),
        jac_g: DMatrix::from_row_slice(1, 2, &[s * cos, two_y * sin]),
        jac_h: DMatrix::zeros(0, 2),
    })
}

/// `(asin eps, 0, eps / sqrt(1 - eps^2), sqrt(1 - eps^2))`.
pub fn concave2d_solution<T: Scalar>(eps: T) -> Result<Concave2DSolution<T>> {
    check_eps(eps)?;
    let root = (T::one() - eps * eps).sqrt();
    Ok(Concave2DSolution {
        x: eps.asin(),
        y: T::zero(),
        lambda: eps / root,
        f: root,
    })
}

impl<T: Scalar> ConstrainedProblem<T> for Concave2D<T> {
    fn dim(&self) -> usize {
        2
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
        concave2d_eval(self.eps, x[0], x[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn endpoint_and_origin_values() {
        let e = concave2d_eval(0.5, 0.0, 0.0).unwrap();
        assert_eq!((e.f, e.g[0]), (1.0, 0.0));
        let e = concave2d_eval(0.5, FRAC_PI_2, 0.0).unwrap();
        assert!(e.f.abs() < 1e-16);
        assert_eq!(e.g[0], 1.0);
        assert!(e.jac_g[(0, 0)].abs() < 1e-16 && e.jac_g[(0, 1)] == 0.0);
    }

    #[test]
    fn value_at_constrained_minimizer() {
        let e = concave2d_eval(0.5, 0.5f64.asin(), 0.0).unwrap();
        assert!((e.f - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((e.f - 0.866025).abs() < 1e-6);
        assert!((e.g[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn solution_grid() {
        let s = concave2d_solution(0.5f64).unwrap();
        assert!((s.x - 0.523599).abs() < 1e-6);
        assert_eq!(s.y, 0.0);
        assert!((s.lambda - 0.577350).abs() < 1e-6);
        assert!((s.f - 0.866025).abs() < 1e-6);
        assert!((concave2d_solution(0.1f64).unwrap().x - 0.100167).abs() < 1e-6);
        // 0.8 / sqrt(0.36) = 4/3
        assert!((concave2d_solution(0.8f64).unwrap().lambda - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_level_and_out_of_domain_points() {
        assert!(Concave2D::new(0.0f64).is_err());
        assert!(Concave2D::new(1.0f64).is_err());
        assert!(concave2d_solution(1.5f64).is_err());
        assert!(matches!(concave2d_eval(0.5, -1e-3, 0.0), Err(Error::Contract(_))));
        assert!(matches!(concave2d_eval(0.5, 2.0, 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let s = concave2d_solution(0.5f32).unwrap();
        assert!((s.lambda - 0.57735).abs() < 1e-5);
        let p = Concave2D::new(0.5f32).unwrap();
        let e = p.eval(&Concave2D::<f32>::initial_point()).unwrap();
        assert!(e.f.is_finite());
    }
}
