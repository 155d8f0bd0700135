//! Hard Concrete stochastic gates.

use lagrangekit::scalar::{sigmoid, Scalar};
use lagrangekit::{Error, Result};
use nalgebra::DVector;

pub const DEFAULT_BETA: f64 = 2.0 / 3.0;
pub const DEFAULT_GAMMA: f64 = -0.1;
pub const DEFAULT_ZETA: f64 = 1.1;
pub const DEFAULT_DROPRATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<T: Scalar> {
    pub log_alpha: DVector<T>,
    pub beta: T,
    pub gamma: T,
    pub zeta: T,
}

impl<T: Scalar> GateParams<T> {
    /// `n` gates at `log_alpha = ln((1 - d) / d)`.
    pub fn with_droprate(n: usize, droprate: f64) -> Result<Self> {
        if !(droprate > 0.0 && droprate < 1.0) {
            return Err(Error::contract("droprate must lie in (0, 1)"));
        }
        let la = ((1.0 - droprate) / droprate).ln();
        Self::new(
            DVector::from_element(n, T::lit(la)),
            T::lit(DEFAULT_BETA),
            T::lit(DEFAULT_GAMMA),
            T::lit(DEFAULT_ZETA),
        )
    }

    pub fn new(log_alpha: DVector<T>, beta: T, gamma: T, zeta: T) -> Result<Self> {
        if !(gamma < T::zero() && zeta > T::zero()) {
            return Err(Error::contract("gate stretch must satisfy gamma < 0 < zeta"));
        }
        if !(beta > T::zero()) {
            return Err(Error::contract("gate temperature must be positive"));
        }
        Ok(Self { log_alpha, beta, gamma, zeta })
    }

    pub fn len(&self) -> usize {
        self.log_alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_alpha.is_empty()
    }

    /// `beta * ln(-gamma / zeta)`, the shift inside the active probability.
    fn shift(&self) -> T {
        self.beta * (-self.gamma / self.zeta).ln()
    }

    /// `P(z_i > 0)` for every gate.
    pub fn active_probabilities(&self) -> DVector<T> {
        let shift = self.shift();
        self.log_alpha.map(|la| sigmoid(la - shift))
    }

    /// Test-time gate values: the noise-free stretched sigmoid.
    pub fn deterministic(&self) -> DVector<T> {
        let (g, z) = (self.gamma, self.zeta);
        self.log_alpha
            .map(|la| (sigmoid(la) * (z - g) + g).max(T::zero()).min(T::one()))
    }

    /// One gate realization from uniform draws `u`, with `dz/dlog_alpha`.
    pub fn sample(&self, u: &[T]) -> Result<(DVector<T>, DVector<T>)> {
        if u.len() != self.len() {
            return Err(Error::contract("one uniform draw per gate is required"));
        }
        let mut z = DVector::zeros(self.len());
        let mut dz = DVector::zeros(self.len());
        for i in 0..self.len() {
            let (zi, di) = hard_concrete_sample(self.log_alpha[i], self.beta, self.gamma, self.zeta, u[i])?;
            z[i] = zi;
            dz[i] = di;
        }
        Ok((z, dz))
    }
}

/// Stretched, clamped concrete sample and its derivative in `log_alpha`
/// (zero where the clamp is active).
pub fn hard_concrete_sample<T: Scalar>(log_alpha: T, beta: T, gamma: T, zeta: T, u: T) -> Result<(T, T)> {
    if !(u > T::zero() && u < T::one()) {
        return Err(Error::contract(format!("uniform draw must lie in (0, 1), got {u}")));
    }
    let s = sigmoid((u.ln() - (T::one() - u).ln() + log_alpha) / beta);
    let stretched = s * (zeta - gamma) + gamma;
    if stretched <= T::zero() {
        Ok((T::zero(), T::zero()))
    } else if stretched >= T::one() {
        Ok((T::one(), T::zero()))
    } else {
        Ok((stretched, (zeta - gamma) * s * (T::one() - s) / beta))
    }
}

/// Expected number of nonzero gates and its gradient in `log_alpha`.
pub fn expected_l0<T: Scalar>(gates: &GateParams<T>) -> (T, DVector<T>) {
    let p = gates.active_probabilities();
    let grad = p.map(|pi| pi * (T::one() - pi));
    (p.iter().copied().sum(), grad)
}

/// Expected fraction of active gates.
pub fn density<T: Scalar>(gates: &GateParams<T>) -> T {
    if gates.is_empty() {
        return T::zero();
    }
    expected_l0(gates).0 / T::from_usize_lossy(gates.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(la: f64) -> GateParams<f64> {
        GateParams::new(DVector::from_element(1, la), DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA).unwrap()
    }

    #[test]
    fn symmetric_draw_is_half() {
        let (z, _) = hard_concrete_sample(0.0, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA, 0.5).unwrap();
        assert!((z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturated_gate_is_one() {
        let (z, dz) = hard_concrete_sample(1e3, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA, 0.3).unwrap();
        assert_eq!((z, dz), (1.0, 0.0));
        let (z, _) = hard_concrete_sample(f64::INFINITY, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA, 0.999).unwrap();
        assert_eq!(z, 1.0);
    }

    #[test]
    fn boundary_draws_rejected() {
        for u in [0.0, 1.0] {
            assert!(hard_concrete_sample(0.0, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA, u).is_err());
        }
    }

    #[test]
    fn fresh_gates_are_almost_surely_on() {
        let g = GateParams::<f64>::with_droprate(3, DEFAULT_DROPRATE).unwrap();
        assert!((g.log_alpha[0] - 4.5951).abs() < 1e-4);
        assert!((g.active_probabilities()[0] - 0.99796).abs() < 1e-5);
        assert!((density(&g) - 0.99796).abs() < 1e-5);
    }

    #[test]
    fn closed_gates_have_zero_density() {
        assert_eq!(density(&defaults(f64::NEG_INFINITY)), 0.0);
        assert_eq!(expected_l0(&defaults(-1e4)).0, 0.0);
    }

    #[test]
    fn invalid_stretch_rejected() {
        assert!(GateParams::new(DVector::<f64>::zeros(1), 0.5, 0.1, 1.1).is_err());
        assert!(GateParams::new(DVector::<f64>::zeros(1), 0.0, -0.1, 1.1).is_err());
    }
}
