//! Primal and dual optimizers and the four solution schemes built from them:
//! penalized minimization, alternating gradient descent-ascent on the
//! Lagrangian, the same on the Augmented Lagrangian, and proxy-constraint
//! descent-ascent.

mod dual;
mod primal;
mod scheme;
mod trace;

pub use dual::{dual_ga_step, dual_nupi_step, dual_update, DualKind, DualOptConfig};
pub use primal::{adam_step, gd_step, AdamState, PrimalKind, PrimalOptConfig, PrimalOptimizer};
pub use scheme::{
    alm_iteration, augmented_value, gda_iteration, penalized_iteration, proxy_gda_iteration, run,
    RunOptions, RunState, Scheme,
};
pub use trace::{RunMetadata, Trace, TraceRecord};
