//! Benchmark problems with analytic gradients and ground-truth oracles.

mod concave2d;
mod convexquad;
mod mixture;
mod rate;

pub use concave2d::{concave2d_eval, concave2d_solution, Concave2D, Concave2DSolution};
pub use convexquad::{convexquad_eval, ConvexQuad};
pub use mixture::{make_gaussian_mixture, Dataset, GaussianMixtureSpec, MAX_RESAMPLES};
pub use rate::{rate_eval, RateConstraint, RateEvaluation, RateProblem};
