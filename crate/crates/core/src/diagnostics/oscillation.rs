use crate::optimizers::Trace;
use crate::scalar::Scalar;

pub const DEFAULT_WINDOW: usize = 1000;
pub const DEFAULT_AMP_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillationVerdict {
    Oscillating,
    Converged,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    pub window: usize,
    /// `max - min` over the final window.
    pub amplitude: f64,
    /// `max - min` over the window before it.
    pub previous_amplitude: f64,
    pub verdict: OscillationVerdict,
}

fn spread(xs: &[f64]) -> f64 {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (hi - lo).max(0.0)
}

/// Converged when the final-window amplitude is below `amp_threshold`;
/// oscillating when it is at least the threshold and the penultimate window's
/// amplitude is within 50% of it. Series shorter than two windows are
/// undetermined.
pub fn detect_oscillation_series(series: &[f64], window: usize, amp_threshold: f64) -> OscillationReport {
    if window == 0 || series.len() < 2 * window {
        return OscillationReport {
            window,
            amplitude: 0.0,
            previous_amplitude: 0.0,
            verdict: OscillationVerdict::Undetermined,
        };
    }
    let n = series.len();
    let amplitude = spread(&series[n - window..]);
    let previous_amplitude = spread(&series[n - 2 * window..n - window]);
    let verdict = if amplitude < amp_threshold {
        OscillationVerdict::Converged
    } else if (amplitude - previous_amplitude).abs() <= 0.5 * amplitude {
        OscillationVerdict::Oscillating
    } else {
        OscillationVerdict::Undetermined
    };
    OscillationReport {
        window,
        amplitude,
        previous_amplitude,
        verdict,
    }
}

/// Oscillation diagnosis of primal coordinate `coord` of a trace. The window
/// is counted in trace records.
pub fn detect_oscillation<T: Scalar>(
    trace: &Trace<T>,
    coord: usize,
    window: usize,
    amp_threshold: f64,
) -> OscillationReport {
    let series: Vec<f64> = trace.coordinate(coord).into_iter().map(|v| v.to_f64_lossy()).collect();
    detect_oscillation_series(&series, window, amp_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_converges() {
        let r = detect_oscillation_series(&[0.3; 50], 10, 1e-2);
        assert_eq!(r.verdict, OscillationVerdict::Converged);
        assert_eq!(r.amplitude, 0.0);
    }

    #[test]
    fn sustained_sine_oscillates() {
        let s: Vec<f64> = (0..400).map(|t| (t as f64 * 0.3).sin()).collect();
        let r = detect_oscillation_series(&s, 100, 1e-2);
        assert_eq!(r.verdict, OscillationVerdict::Oscillating);
        assert!(r.amplitude > 1.9);
    }

    #[test]
    fn fast_decay_is_not_called_oscillating() {
        let s: Vec<f64> = (0..400).map(|t| (t as f64 * 0.3).sin() * (-0.01 * t as f64).exp()).collect();
        let r = detect_oscillation_series(&s, 100, 1e-2);
        assert_eq!(r.verdict, OscillationVerdict::Undetermined);
    }

    #[test]
    fn short_series_is_undetermined() {
        let r = detect_oscillation_series(&[1.0, 2.0, 1.0], 2, 1e-2);
        assert_eq!(r.verdict, OscillationVerdict::Undetermined);
    }
}
