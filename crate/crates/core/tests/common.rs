#![allow(dead_code)]

use nalgebra::DVector;

/// `|a - b|_2 / max(|a|_2 + |b|_2, floor)`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    (a - b).norm() / (a.norm() + b.norm()).max(floor)
}

/// Central differences of a scalar function.
pub fn fd_grad(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        }),
    )
}
