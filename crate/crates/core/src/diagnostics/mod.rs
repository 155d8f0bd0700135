//! KKT certification and descent-ascent oscillation diagnosis.

mod kkt;
mod oscillation;

pub use kkt::{
    certify, fd_lagrangian_hessian, kkt_first_order, kkt_second_order, KktReport, KktTolerances,
    SecondOrderReport, SecondOrderVerdict, MAX_SECOND_ORDER_DIM,
};
pub use oscillation::{
    detect_oscillation, detect_oscillation_series, OscillationReport, OscillationVerdict,
    DEFAULT_AMP_THRESHOLD, DEFAULT_WINDOW,
};
