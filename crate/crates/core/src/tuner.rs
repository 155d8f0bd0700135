//! Log-scale bisection over a scalar penalty coefficient.
//!
//! The metric is assumed monotone in the coefficient: decreasing by default
//! (density against penalty strength), increasing with `inverted`.

use std::io::{Read, Write};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::fmt::sig6;
use crate::scalar::Scalar;

/// `sqrt(lo * hi)`.
pub fn log_midpoint<T: Scalar>(lo: T, hi: T) -> Result<T> {
    if !(lo > T::zero() && hi > lo) {
        return Err(Error::contract(format!("bisection bracket must satisfy 0 < lo < hi, got ({lo}, {hi})")));
    }
    Ok((lo * hi).sqrt())
}

/// What one trained model reports back to the tuner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome<T> {
    pub metric: T,
    pub accuracy: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord<T> {
    /// 0 for the two endpoints, then 1, 2, ...
    pub iteration: usize,
    pub coefficient: T,
    pub metric: Option<T>,
    pub accuracy: Option<T>,
    pub wall_time: Duration,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BisectionStatus {
    Running,
    /// Last observation within `tol` of the target.
    Converged,
    /// `max_iters` post-endpoint steps taken without converging.
    Exhausted,
    /// A probe failed; its error is in the history.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionState<T> {
    pub lo: T,
    pub hi: T,
    lo0: T,
    hi0: T,
    pub target: T,
    pub tol: T,
    pub max_iters: usize,
    pub inverted: bool,
    /// Coefficient whose metric is awaited.
    pub current: T,
    pub steps: usize,
    pub status: BisectionStatus,
    pub history: Vec<ProbeRecord<T>>,
    /// Observations that contradict the assumed monotonicity.
    pub anomalies: Vec<String>,
}

impl<T: Scalar> BisectionState<T> {
    pub fn new(lo: T, hi: T, target: T, tol: T, max_iters: usize) -> Result<Self> {
        let current = log_midpoint(lo, hi)?;
        if !(tol > T::zero()) {
            return Err(Error::contract("bisection tolerance must be positive"));
        }
        Ok(Self {
            lo,
            hi,
            lo0: lo,
            hi0: hi,
            target,
            tol,
            max_iters,
            inverted: false,
            current,
            steps: 0,
            status: if max_iters == 0 {
                BisectionStatus::Exhausted
            } else {
                BisectionStatus::Running
            },
            history: Vec::new(),
            anomalies: Vec::new(),
        })
    }

    pub fn inverted(mut self, inverted: bool) -> Self {
        self.inverted = inverted;
        self
    }

    pub fn initial_bracket(&self) -> (T, T) {
        (self.lo0, self.hi0)
    }

    pub fn is_done(&self) -> bool {
        self.status != BisectionStatus::Running
    }

    fn within_tol(&self, metric: T) -> bool {
        (metric - self.target).abs() <= self.tol
    }

    /// Metric too high means the coefficient must grow (decreasing metric).
    fn needs_larger(&self, metric: T) -> bool {
        (metric > self.target) != self.inverted
    }

    /// Record the endpoint observations (iteration 0). Stops immediately when
    /// an endpoint already meets the target.
    pub fn record_endpoints(&mut self, lo: ProbeOutcome<T>, hi: ProbeOutcome<T>, wall: [Duration; 2]) {
        for (c, o, w) in [(self.lo0, lo, wall[0]), (self.hi0, hi, wall[1])] {
            self.history.push(ProbeRecord {
                iteration: 0,
                coefficient: c,
                metric: Some(o.metric),
                accuracy: o.accuracy,
                wall_time: w,
                error: None,
            });
        }
        if !self.needs_larger(lo.metric) || self.needs_larger(hi.metric) {
            self.anomalies.push(format!(
                "endpoints do not bracket the target: metric({}) = {}, metric({}) = {}",
                self.lo0, lo.metric, self.hi0, hi.metric
            ));
        }
        if self.within_tol(lo.metric) || self.within_tol(hi.metric) {
            self.status = BisectionStatus::Converged;
        }
    }

    /// Feed the metric observed at `self.current`. Updates the bracket,
    /// appends to the history and proposes the next probe.
    pub fn observe(&mut self, outcome: ProbeOutcome<T>, wall: Duration) -> Result<()> {
        if self.is_done() {
            return Err(Error::contract("bisection already terminated"));
        }
        let c = self.current;
        self.steps += 1;
        self.history.push(ProbeRecord {
            iteration: self.steps,
            coefficient: c,
            metric: Some(outcome.metric),
            accuracy: outcome.accuracy,
            wall_time: wall,
            error: None,
        });
        if let Some(prev) = self.history.iter().rev().skip(1).find(|r| r.metric.is_some()) {
            let (pc, pm) = (prev.coefficient, prev.metric.expect("filtered"));
            let increasing_c = c > pc;
            let increasing_m = outcome.metric > pm;
            if outcome.metric != pm && (increasing_c == increasing_m) != self.inverted {
                self.anomalies.push(format!(
                    "non-monotone response between c = {pc} ({pm}) and c = {c} ({})",
                    outcome.metric
                ));
            }
        }
        if self.needs_larger(outcome.metric) {
            self.lo = c;
        } else {
            self.hi = c;
        }
        if self.within_tol(outcome.metric) {
            self.status = BisectionStatus::Converged;
        } else if self.steps >= self.max_iters {
            self.status = BisectionStatus::Exhausted;
        }
        self.current = log_midpoint(self.lo, self.hi)?;
        Ok(())
    }

    fn fail(&mut self, c: T, iteration: usize, err: &Error, wall: Duration) {
        self.history.push(ProbeRecord {
            iteration,
            coefficient: c,
            metric: None,
            accuracy: None,
            wall_time: wall,
            error: Some(err.to_string()),
        });
        self.status = BisectionStatus::Failed;
    }

    /// History as CSV: `iteration, coefficient, metric, accuracy, wall_time`.
    pub fn write_history_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_history_csv(&self.history, writer)
    }
}

/// Functional form of [`BisectionState::observe`].
pub fn bisect_step<T: Scalar>(mut state: BisectionState<T>, observed_metric: T) -> Result<BisectionState<T>> {
    state.observe(
        ProbeOutcome {
            metric: observed_metric,
            accuracy: None,
        },
        Duration::ZERO,
    )?;
    Ok(state)
}

/// Solve at both endpoints, then bisect until the metric is within tolerance
/// or the step budget runs out. `solve` runs one full training per call.
pub fn run_bisection<T: Scalar, F>(mut solve: F, mut state: BisectionState<T>) -> BisectionState<T>
where
    F: FnMut(T) -> Result<ProbeOutcome<T>>,
{
    let (lo0, hi0) = state.initial_bracket();
    let mut timed = |c: T| {
        let started = Instant::now();
        let out = solve(c);
        (out, started.elapsed())
    };
    let (lo_out, lo_wall) = timed(lo0);
    let lo_out = match lo_out {
        Ok(o) => o,
        Err(e) => {
            state.fail(lo0, 0, &e, lo_wall);
            return state;
        }
    };
    let (hi_out, hi_wall) = timed(hi0);
    let hi_out = match hi_out {
        Ok(o) => o,
        Err(e) => {
            state.history.push(ProbeRecord {
                iteration: 0,
                coefficient: lo0,
                metric: Some(lo_out.metric),
                accuracy: lo_out.accuracy,
                wall_time: lo_wall,
                error: None,
            });
            state.fail(hi0, 0, &e, hi_wall);
            return state;
        }
    };
    let was_exhausted = state.status == BisectionStatus::Exhausted;
    state.status = BisectionStatus::Running;
    state.record_endpoints(lo_out, hi_out, [lo_wall, hi_wall]);
    if was_exhausted && !state.is_done() {
        state.status = BisectionStatus::Exhausted;
    }
    while !state.is_done() {
        let c = state.current;
        let (out, wall) = timed(c);
        match out {
            Ok(o) => {
                if let Err(e) = state.observe(o, wall) {
                    state.fail(c, state.steps + 1, &e, Duration::ZERO);
                }
            }
            Err(e) => state.fail(c, state.steps + 1, &e, wall),
        }
    }
    state
}

pub fn history_csv_header() -> [&'static str; 5] {
    ["iteration", "coefficient", "metric", "accuracy", "wall_time"]
}

pub fn write_history_csv<T: Scalar, W: Write>(history: &[ProbeRecord<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(history_csv_header())?;
    let opt = |v: Option<T>| v.map(|v| sig6(v.to_f64_lossy())).unwrap_or_default();
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            sig6(r.coefficient.to_f64_lossy()),
            opt(r.metric),
            opt(r.accuracy),
            sig6(r.wall_time.as_secs_f64()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a history CSV. Empty metric/accuracy cells become `None`.
pub fn read_history_csv<R: Read>(reader: R) -> Result<Vec<ProbeRecord<f64>>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().collect::<Vec<_>>() != history_csv_header() {
        return Err(Error::Parse("unexpected bisection history header".into()));
    }
    let parse = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(ProbeRecord {
            iteration: rec[0].parse().map_err(|e| Error::Parse(format!("iteration: {e}")))?,
            coefficient: parse(&rec[1])?.ok_or_else(|| Error::Parse("missing coefficient".into()))?,
            metric: parse(&rec[2])?,
            accuracy: parse(&rec[3])?,
            wall_time: Duration::from_secs_f64(parse(&rec[4])?.unwrap_or(0.0).max(0.0)),
            error: None,
        });
    }
    Ok(out)
}

/// Recorded (coefficient, density %, accuracy %) rows of a sparsity tuning
/// session on the 300-100 MLP, used to replay the search without training.
pub const SPARSITY_REFERENCE_ROWS: [(f64, f64, f64); 7] = [
    (1.00e-3, 84.5, 99.97),
    (1.0, 25.3, 99.97),
    (3.16e-2, 68.1, 99.96),
    (1.78e-1, 54.2, 100.00),
    (4.22e-1, 39.0, 100.00),
    (2.74e-1, 46.9, 99.99),
    (2.21e-1, 50.5, 99.99),
];

/// Round to three significant figures.
pub fn round3(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let scale = 10f64.powi(2 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

/// Replay solver over [`SPARSITY_REFERENCE_ROWS`]: looks the coefficient up by
/// its three-significant-figure value. Unknown coefficients are an error.
pub fn reference_replay(c: f64) -> Result<ProbeOutcome<f64>> {
    let key = round3(c);
    SPARSITY_REFERENCE_ROWS
        .iter()
        .find(|(rc, _, _)| (round3(*rc) - key).abs() <= 1e-12 * key.abs())
        .map(|&(_, density, acc)| ProbeOutcome {
            metric: density,
            accuracy: Some(acc),
        })
        .ok_or_else(|| Error::contract(format!("no recorded run for coefficient {}", sig6(c))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_examples() {
        assert!((log_midpoint(1e-3f64, 1.0).unwrap() - 3.1623e-2).abs() < 1e-6);
        assert!((log_midpoint(3.16e-2f64, 1.0).unwrap() - 1.778e-1).abs() < 1e-4);
        assert!((log_midpoint(0.5f64, 0.5 * 9.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(log_midpoint(0.0, 1.0).is_err());
        assert!(log_midpoint(1.0, 1.0).is_err());
        assert!(log_midpoint(-1.0, 1.0).is_err());
    }

    #[test]
    fn exact_hit_terminates() {
        let s = BisectionState::new(1e-3, 1.0, 50.0, 2.0, 10).unwrap();
        let s = bisect_step(s, 50.0).unwrap();
        assert_eq!(s.status, BisectionStatus::Converged);
        assert!(bisect_step(s, 40.0).is_err());
    }

    #[test]
    fn first_probe_is_independent_of_metrics() {
        for m in [0.0, 50.0, 1e9] {
            let mut s = BisectionState::new(1e-3f64, 1.0, 50.0, 2.0, 5).unwrap();
            s.record_endpoints(
                ProbeOutcome { metric: m, accuracy: None },
                ProbeOutcome { metric: -m, accuracy: None },
                [Duration::ZERO; 2],
            );
            assert!((s.current - 3.16227766e-2).abs() < 1e-9);
        }
    }

    #[test]
    fn replay_reproduces_reference_sequence() {
        let state = BisectionState::new(1e-3, 1.0, 50.0, 2.0, 10).unwrap();
        let s = run_bisection(reference_replay, state);
        assert_eq!(s.status, BisectionStatus::Converged);
        let probes: Vec<f64> = s.history[2..].iter().map(|r| round3(r.coefficient)).collect();
        assert_eq!(probes, vec![3.16e-2, 1.78e-1, 4.22e-1, 2.74e-1, 2.21e-1]);
        assert_eq!(s.steps, 5);
        assert_eq!(s.history.last().unwrap().metric, Some(50.5));
        assert!(s.anomalies.is_empty(), "{:?}", s.anomalies);
    }

    #[test]
    fn endpoints_only() {
        let state = BisectionState::new(1e-3, 1.0, 50.0, 2.0, 0).unwrap();
        let s = run_bisection(reference_replay, state);
        assert_eq!(s.history.len(), 2);
        assert_eq!(s.status, BisectionStatus::Exhausted);
    }

    #[test]
    fn inverted_metric_moves_the_other_way() {
        // metric increasing in c: c = 0.1 hits 50.
        let solve = |c: f64| Ok(ProbeOutcome { metric: 50.0 + 20.0 * (c / 0.1).log10(), accuracy: None });
        let s = run_bisection(solve, BisectionState::new(1e-3, 10.0, 50.0, 0.5, 30).unwrap().inverted(true));
        assert_eq!(s.status, BisectionStatus::Converged);
        assert!((s.history.last().unwrap().coefficient.log10() + 1.0).abs() < 0.05);
    }

    #[test]
    fn failing_probe_is_recorded() {
        let s = run_bisection(
            |c: f64| if c < 0.5 && c > 1e-2 { Err(Error::contract("boom")) } else { Ok(ProbeOutcome { metric: 100.0 * (1.0 - c), accuracy: None }) },
            BisectionState::new(1e-3, 1.0, 50.0, 1.0, 5).unwrap(),
        );
        assert_eq!(s.status, BisectionStatus::Failed);
        assert!(s.history.last().unwrap().error.as_deref().unwrap().contains("boom"));
    }

    #[test]
    fn history_csv_round_trip() {
        let s = run_bisection(reference_replay, BisectionState::new(1e-3, 1.0, 50.0, 2.0, 10).unwrap());
        let mut buf = Vec::new();
        s.write_history_csv(&mut buf).unwrap();
        let back = read_history_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), s.history.len());
        for (a, b) in back.iter().zip(&s.history) {
            assert_eq!(a.iteration, b.iteration);
            assert!((a.coefficient - b.coefficient).abs() <= 1e-5 * b.coefficient);
            assert_eq!(a.metric, b.metric);
        }
    }

    #[test]
    fn round3_examples() {
        assert_eq!(round3(0.0316227766), 0.0316);
        assert_eq!(round3(0.2209), 0.221);
        assert_eq!(round3(1.0), 1.0);
    }
}
