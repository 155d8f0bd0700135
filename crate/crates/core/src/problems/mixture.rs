use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Consecutive resample attempts before generation gives up.
pub const MAX_RESAMPLES: u64 = 100;

const PERCEPTRON_EPOCHS: usize = 10_000;

/// Two isotropic Gaussian blobs centred at `(-sep/2, 0)` (label 0) and
/// `(+sep/2, 0)` (label 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixtureSpec<T> {
    pub mean_separation: T,
    pub std: T,
    pub n_per_class: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for GaussianMixtureSpec<T> {
    fn default() -> Self {
        Self {
            mean_separation: T::lit(4.0),
            std: T::lit(0.5),
            n_per_class: 100,
            seed: 0,
        }
    }
}

/// Labeled 2-D points. Labels are 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub points: Vec<[T; 2]>,
    pub labels: Vec<u8>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(points: Vec<[T; 2]>, labels: Vec<u8>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::contract("points and labels differ in length"));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::contract("labels must be 0 or 1"));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    /// Hard-margin separability: a perceptron on `(x1, x2, 1)` reaches zero
    /// mistakes within a fixed epoch budget.
    pub fn is_linearly_separable(&self) -> bool {
        let mut w = [0.0f64; 3];
        for _ in 0..PERCEPTRON_EPOCHS {
            let mut mistakes = 0;
            for (p, &label) in self.points.iter().zip(&self.labels) {
                let x = [p[0].to_f64_lossy(), p[1].to_f64_lossy(), 1.0];
                let y = if label == 1 { 1.0 } else { -1.0 };
                let margin = y * (w[0] * x[0] + w[1] * x[1] + w[2] * x[2]);
                if margin <= 0.0 {
                    mistakes += 1;
                    for k in 0..3 {
                        w[k] += y * x[k];
                    }
                }
            }
            if mistakes == 0 {
                return true;
            }
        }
        false
    }

    /// CSV with header `x1,x2,label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x1", "x2", "label"])?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            w.write_record([
                p[0].to_f64_lossy().to_string(),
                p[1].to_f64_lossy().to_string(),
                l.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x1", "x2", "label"] {
            return Err(Error::Parse(format!("unexpected dataset header {headers:?}")));
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let num = |i: usize| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}, column {i}: {e}")))
            };
            points.push([T::lit(num(0)?), T::lit(num(1)?)]);
            labels.push(
                record[2]
                    .parse::<u8>()
                    .map_err(|e| Error::Parse(format!("row {row}, label: {e}")))?,
            );
        }
        Self::new(points, labels)
    }
}

/// Sample the mixture, resampling on a fresh ChaCha stream until the sample is
/// linearly separable.
pub fn make_gaussian_mixture<T: Scalar>(spec: &GaussianMixtureSpec<T>) -> Result<Dataset<T>> {
    if spec.n_per_class == 0 {
        return Err(Error::contract("n_per_class must be at least 1"));
    }
    if spec.std < T::zero() {
        return Err(Error::contract("std must be nonnegative"));
    }
    let half = spec.mean_separation / T::lit(2.0);
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(attempt);
        let mut points = Vec::with_capacity(2 * spec.n_per_class);
        let mut labels = Vec::with_capacity(2 * spec.n_per_class);
        for (label, centre) in [(0u8, -half), (1u8, half)] {
            for _ in 0..spec.n_per_class {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                points.push([centre + spec.std * T::lit(z0), spec.std * T::lit(z1)]);
                labels.push(label);
            }
        }
        let data = Dataset { points, labels };
        if data.is_linearly_separable() {
            return Ok(data);
        }
    }
    Err(Error::Generation(format!(
        "no linearly separable sample after {MAX_RESAMPLES} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_spread_collapses_to_means() {
        let spec = GaussianMixtureSpec {
            std: 0.0f64,
            n_per_class: 5,
            ..Default::default()
        };
        let d = make_gaussian_mixture(&spec).unwrap();
        assert!(d.points[..5].iter().all(|p| p == &[-2.0, 0.0]));
        assert!(d.points[5..].iter().all(|p| p == &[2.0, 0.0]));
    }

    #[test]
    fn default_spec_is_balanced_separable_and_deterministic() {
        let spec = GaussianMixtureSpec::<f64>::default();
        let a = make_gaussian_mixture(&spec).unwrap();
        let b = make_gaussian_mixture(&spec).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a.class_counts(), [100, 100]);
        assert!(a.is_linearly_separable());
        assert_eq!(a, b);
    }

    #[test]
    fn overlapping_blobs_fail_generation() {
        let spec = GaussianMixtureSpec {
            mean_separation: 0.0f64,
            std: 1.0,
            n_per_class: 50,
            seed: 3,
        };
        assert!(matches!(make_gaussian_mixture(&spec), Err(Error::Generation(_))));
    }

    #[test]
    fn non_separable_set_is_detected() {
        let d = Dataset::new(
            vec![[0.0f64, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        assert!(!d.is_linearly_separable());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = make_gaussian_mixture(&GaussianMixtureSpec::<f64>::default()).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
        assert!(Dataset::<f64>::read_csv("a,b,c\n1,2,0\n".as_bytes()).is_err());
    }

    #[test]
    fn zero_per_class_is_rejected() {
        let spec = GaussianMixtureSpec {
            n_per_class: 0,
            ..GaussianMixtureSpec::<f64>::default()
        };
        assert!(matches!(make_gaussian_mixture(&spec), Err(Error::Contract(_))));
    }
}
