use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalKind {
    Gd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalOptConfig<T> {
    pub kind: PrimalKind,
    pub step_size: T,
    pub adam_beta1: T,
    pub adam_beta2: T,
    pub adam_epsilon: T,
}

impl<T: Scalar> PrimalOptConfig<T> {
    pub fn gd(step_size: T) -> Self {
        Self {
            kind: PrimalKind::Gd,
            ..Self::adam(step_size)
        }
    }

    /// Adam with `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn adam(step_size: T) -> Self {
        Self {
            kind: PrimalKind::Adam,
            step_size,
            adam_beta1: T::lit(0.9),
            adam_beta2: T::lit(0.999),
            adam_epsilon: T::lit(1e-8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |b: T| b > T::zero() && b < T::one();
        if !(self.step_size > T::zero()) {
            return Err(Error::contract("primal step size must be positive"));
        }
        if self.kind == PrimalKind::Adam {
            if !unit(self.adam_beta1) || !unit(self.adam_beta2) {
                return Err(Error::contract("Adam betas must lie in (0, 1)"));
            }
            if !(self.adam_epsilon > T::zero()) {
                return Err(Error::contract("Adam epsilon must be positive"));
            }
        }
        Ok(())
    }
}

/// `x - eta * grad`.
pub fn gd_step<T: Scalar>(x: &DVector<T>, grad: &DVector<T>, eta: T) -> DVector<T> {
    x - grad * eta
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar> {
    pub m: DVector<T>,
    pub v: DVector<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            m: DVector::zeros(dim),
            v: DVector::zeros(dim),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Mutates the moments and returns the
/// displacement to add to the parameters.
pub fn adam_step<T: Scalar>(
    state: &mut AdamState<T>,
    grad: &DVector<T>,
    cfg: &PrimalOptConfig<T>,
) -> DVector<T> {
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    state.t += 1;
    let t = state.t as i32;
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);
    let mut delta = DVector::zeros(grad.len());
    for i in 0..grad.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        delta[i] = -cfg.step_size * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
    }
    delta
}

/// A configured primal optimizer plus whatever state it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalOptimizer<T: Scalar> {
    cfg: PrimalOptConfig<T>,
    adam: Option<AdamState<T>>,
}

impl<T: Scalar> PrimalOptimizer<T> {
    pub fn new(cfg: PrimalOptConfig<T>, dim: usize) -> Result<Self> {
        cfg.validate()?;
        let adam = (cfg.kind == PrimalKind::Adam).then(|| AdamState::new(dim));
        Ok(Self { cfg, adam })
    }

    pub fn config(&self) -> &PrimalOptConfig<T> {
        &self.cfg
    }

    /// Next iterate, before any domain projection.
    pub fn step(&mut self, x: &DVector<T>, grad: &DVector<T>) -> DVector<T> {
        match &mut self.adam {
            None => gd_step(x, grad, self.cfg.step_size),
            Some(state) => x + adam_step(state, grad, &self.cfg),
        }
    }
}
