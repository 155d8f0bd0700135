//! Constrained non-convex optimization toolkit.
//!
//! Problems are `min f(x)` subject to `g(x) <= eps_g`, `h(x) = eps_h`, `x` in a
//! box. Four schemes are provided: fixed-coefficient penalization, alternating
//! gradient descent-ascent on the Lagrangian (with projected gradient ascent
//! or a PI controller on the multipliers), the Augmented Lagrangian, and proxy
//! constraints. Bundled benchmark problems carry analytic gradients and
//! ground-truth solutions; the diagnostics module certifies candidate points
//! against the KKT conditions; the tuner implements log-scale bisection over a
//! penalty coefficient.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision instantiations.

pub mod diagnostics;
pub mod error;
pub mod fmt;
pub mod model;
pub mod optimizers;
pub mod problems;
pub mod scalar;
pub mod tuner;

pub use error::{Error, Result};
pub use model::{
    evaluate, feasible, lagrangian_grad_x, lagrangian_value, penalized_value, violations,
    ConstrainedProblem, ConstraintLevels, Domain, DualState, Evaluation, PrimalPoint,
    ViolationVector,
};
pub use scalar::Scalar;

pub type Evaluation64 = model::Evaluation<f64>;
pub type DualState64 = model::DualState<f64>;
pub type Concave2D64 = problems::Concave2D<f64>;
pub type ConvexQuad64 = problems::ConvexQuad<f64>;
pub type RateProblem64 = problems::RateProblem<f64>;
pub type Dataset64 = problems::Dataset<f64>;
pub type Trace64 = optimizers::Trace<f64>;
pub type PrimalOptConfig64 = optimizers::PrimalOptConfig<f64>;
pub type DualOptConfig64 = optimizers::DualOptConfig<f64>;
pub type BisectionState64 = tuner::BisectionState<f64>;

pub type Evaluation32 = model::Evaluation<f32>;
pub type Concave2D32 = problems::Concave2D<f32>;
pub type Trace32 = optimizers::Trace<f32>;
