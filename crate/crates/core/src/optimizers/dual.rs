use crate::error::{Error, Result};
use crate::model::{DualState, ViolationVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualKind {
    /// Projected gradient ascent.
    Ga,
    /// PI controller on the violation signal.
    Nupi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptConfig<T> {
    pub kind: DualKind,
    pub step_size: T,
    pub kappa_p: T,
    pub nu: T,
}

impl<T: Scalar> DualOptConfig<T> {
    pub fn ga(step_size: T) -> Self {
        Self {
            kind: DualKind::Ga,
            step_size,
            kappa_p: T::zero(),
            nu: T::zero(),
        }
    }

    pub fn nupi(step_size: T, kappa_p: T) -> Self {
        Self {
            kind: DualKind::Nupi,
            step_size,
            kappa_p,
            nu: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        // A zero step freezes the multipliers at zero: the unconstrained run.
        if !(self.step_size >= T::zero()) {
            return Err(Error::contract("dual step size must be nonnegative"));
        }
        if !(self.kappa_p >= T::zero()) {
            return Err(Error::contract("damping gain kappa_p must be nonnegative"));
        }
        if !(self.nu >= T::zero() && self.nu < T::one()) {
            return Err(Error::contract("nu must lie in [0, 1)"));
        }
        if self.nu != T::zero() {
            return Err(Error::contract("only nu = 0 is supported by the PI dual update"));
        }
        Ok(())
    }
}

/// `mu += eta * viol_h`, `lambda = max(0, lambda + eta * viol_g)`.
pub fn dual_ga_step<T: Scalar>(dual: &DualState<T>, viol: &ViolationVector<T>, eta: T) -> DualState<T> {
    let mut next = dual.clone();
    for (l, &e) in next.lambda.iter_mut().zip(viol.viol_g.iter()) {
        *l = (*l + eta * e).max(T::zero());
    }
    for (m, &e) in next.mu.iter_mut().zip(viol.viol_h.iter()) {
        *m += eta * e;
    }
    next
}

/// PI update with `nu = 0`:
/// `lambda = max(0, lambda + eta * (e_t + kappa_p * (e_t - e_{t-1})))`, and
/// the same law without projection for `mu`. On the first call the stored
/// error is taken equal to `e_t`, so the proportional term vanishes.
pub fn dual_nupi_step<T: Scalar>(
    dual: &DualState<T>,
    viol: &ViolationVector<T>,
    cfg: &DualOptConfig<T>,
) -> Result<DualState<T>> {
    cfg.validate()?;
    let (eta, kp) = (cfg.step_size, cfg.kappa_p);
    let drive = |e: T, prev: T| {
        if kp == T::zero() {
            e
        } else {
            e + kp * (e - prev)
        }
    };
    let mut next = dual.clone();
    let (prev_g, prev_h) = if dual.initialized {
        (dual.prev_error_g.clone(), dual.prev_error_h.clone())
    } else {
        (viol.viol_g.clone(), viol.viol_h.clone())
    };
    for i in 0..next.lambda.len() {
        let e = viol.viol_g[i];
        next.lambda[i] = (next.lambda[i] + eta * drive(e, prev_g[i])).max(T::zero());
    }
    for j in 0..next.mu.len() {
        let e = viol.viol_h[j];
        next.mu[j] += eta * drive(e, prev_h[j]);
    }
    next.prev_error_g = viol.viol_g.clone();
    next.prev_error_h = viol.viol_h.clone();
    next.initialized = true;
    Ok(next)
}

/// Dispatch on the configured dual optimizer.
pub fn dual_update<T: Scalar>(
    dual: &DualState<T>,
    viol: &ViolationVector<T>,
    cfg: &DualOptConfig<T>,
) -> Result<DualState<T>> {
    if dual.num_ineq() != viol.viol_g.len() || dual.num_eq() != viol.viol_h.len() {
        return Err(Error::contract("dual state and violation shapes differ"));
    }
    match cfg.kind {
        DualKind::Ga => {
            cfg.validate()?;
            Ok(dual_ga_step(dual, viol, cfg.step_size))
        }
        DualKind::Nupi => dual_nupi_step(dual, viol, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn viol(g: &[f64], h: &[f64]) -> ViolationVector<f64> {
        ViolationVector {
            viol_g: DVector::from_row_slice(g),
            viol_h: DVector::from_row_slice(h),
        }
    }

    fn dual(l: &[f64], m: &[f64]) -> DualState<f64> {
        DualState::with_multipliers(l.to_vec(), m.to_vec()).unwrap()
    }

    #[test]
    fn ga_examples() {
        let d = dual_ga_step(&dual(&[0.1], &[]), &viol(&[0.5], &[]), 0.01);
        assert!((d.lambda[0] - 0.105).abs() < 1e-15);
        let d = dual_ga_step(&dual(&[0.02], &[]), &viol(&[-0.5], &[]), 0.1);
        assert_eq!(d.lambda[0], 0.0);
        let d = dual_ga_step(&dual(&[], &[0.0]), &viol(&[], &[-0.3]), 0.1);
        assert!((d.mu[0] + 0.03).abs() < 1e-15);
    }

    #[test]
    fn nupi_with_memory() {
        let mut d = dual(&[0.2], &[]);
        d.prev_error_g = DVector::from_vec(vec![0.012]);
        d.initialized = true;
        let cfg = DualOptConfig::nupi(0.3, 40.0);
        let next = dual_nupi_step(&d, &viol(&[0.01], &[]), &cfg).unwrap();
        assert!((next.lambda[0] - 0.179).abs() < 1e-12);
        assert_eq!(next.prev_error_g[0], 0.01);
    }

    #[test]
    fn nupi_first_call_is_pure_integral() {
        let cfg = DualOptConfig::nupi(0.3, 40.0);
        let next = dual_nupi_step(&DualState::zeros(1, 0), &viol(&[0.05], &[]), &cfg).unwrap();
        assert!((next.lambda[0] - 0.015).abs() < 1e-15);
        assert!(next.initialized);
    }

    #[test]
    fn nupi_without_damping_is_gradient_ascent() {
        let cfg = DualOptConfig::nupi(0.3, 0.0);
        let mut d = dual(&[0.4, 0.0], &[0.1]);
        for e in [[0.2, -0.1, 0.3], [-0.7, 0.05, -0.2], [0.01, -3.0, 1.5]] {
            let v = viol(&e[..2], &e[2..]);
            let pi = dual_nupi_step(&d, &v, &cfg).unwrap();
            let ga = dual_ga_step(&d, &v, 0.3);
            assert_eq!(pi.lambda, ga.lambda);
            assert_eq!(pi.mu, ga.mu);
            d = pi;
        }
    }

    #[test]
    fn equality_multiplier_is_not_projected_under_pi() {
        let cfg = DualOptConfig::nupi(0.5, 2.0);
        let next = dual_nupi_step(&DualState::zeros(0, 1), &viol(&[], &[-1.0]), &cfg).unwrap();
        assert_eq!(next.mu[0], -0.5);
    }

    #[test]
    fn config_validation() {
        assert!(DualOptConfig::ga(-1e-3f64).validate().is_err());
        assert!(DualOptConfig::ga(0.0f64).validate().is_ok());
        assert!(DualOptConfig::nupi(0.1f64, -1.0).validate().is_err());
        let mut c = DualOptConfig::nupi(0.1f64, 1.0);
        c.nu = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn repeated_violation_increases_multiplier_strictly() {
        let mut d = DualState::zeros(1, 0);
        let v = viol(&[0.25], &[]);
        for _ in 0..100 {
            let next = dual_ga_step(&d, &v, 0.01);
            assert!(next.lambda[0] > d.lambda[0]);
            d = next;
        }
    }
}
