use std::f64::consts::FRAC_PI_2;

use lagrangekit::diagnostics::{detect_oscillation, OscillationVerdict, DEFAULT_AMP_THRESHOLD, DEFAULT_WINDOW};
use lagrangekit::optimizers::{run, DualOptConfig, PrimalOptConfig, RunOptions, Scheme, Trace};
use lagrangekit::problems::{
    make_gaussian_mixture, rate_eval, Concave2D, ConvexQuad, GaussianMixtureSpec, RateConstraint, RateProblem,
};
use nalgebra::DVector;

const EPS_GRID: [f64; 8] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

fn concave_run(eps: f64, scheme: Scheme<'_, f64>, dual: DualOptConfig<f64>) -> Trace<f64> {
    let p = Concave2D::new(eps).unwrap();
    run(&p, &scheme, Concave2D::initial_point(), &PrimalOptConfig::gd(0.01), &dual, &RunOptions::new(10_000)).unwrap()
}

fn assert_recovers(t: &Trace<f64>, eps: f64) {
    let last = t.last();
    let (x, y, lam) = (last.x[0], last.x[1], last.lambda[0]);
    assert!((x - eps.asin()).abs() <= 1e-3, "eps {eps}: x = {x}");
    assert!(y.abs() <= 1e-6, "eps {eps}: y = {y}");
    assert!((lam - eps / (1.0 - eps * eps).sqrt()).abs() <= 1e-2, "eps {eps}: lambda = {lam}");
}

#[test]
fn pi_controlled_duals_recover_every_solution() {
    for eps in EPS_GRID {
        let t = concave_run(eps, Scheme::Lagrangian, DualOptConfig::nupi(0.3, 40.0));
        assert_recovers(&t, eps);
        let r = detect_oscillation(&t, 0, DEFAULT_WINDOW, DEFAULT_AMP_THRESHOLD);
        assert_eq!(r.verdict, OscillationVerdict::Converged);
    }
}

#[test]
fn augmented_lagrangian_recovers_interior_levels() {
    for eps in [0.2, 0.3, 0.4, 0.5, 0.6, 0.7] {
        let t = concave_run(eps, Scheme::Augmented { c: 10.0 }, DualOptConfig::ga(0.1));
        assert_recovers(&t, eps);
    }
}

#[test]
fn plain_ascent_oscillates() {
    let t = concave_run(0.5, Scheme::Lagrangian, DualOptConfig::ga(0.3));
    let r = detect_oscillation(&t, 0, DEFAULT_WINDOW, DEFAULT_AMP_THRESHOLD);
    assert_eq!(r.verdict, OscillationVerdict::Oscillating, "{r:?}");
    assert!(r.amplitude >= 1e-2);
}

#[test]
fn penalties_land_on_endpoints() {
    for (c, x_end) in [(0.5, FRAC_PI_2), (2.0, 0.0), (1.0 / 3f64.sqrt(), FRAC_PI_2)] {
        let t = concave_run(0.5, Scheme::Penalized { c_g: &[c], c_h: &[] }, DualOptConfig::ga(0.1));
        let last = t.last();
        assert!((last.x[0] - x_end).abs() <= 1e-6, "c = {c}: x = {}", last.x[0]);
        assert!(last.x[1].abs() <= 1e-6);
    }
}

#[test]
fn convex_problem_reaches_kkt_point() {
    let p = ConvexQuad::<f64>::new();
    let t = run(&p, &Scheme::Lagrangian, ConvexQuad::initial_point(), &PrimalOptConfig::gd(0.1), &DualOptConfig::ga(0.05), &RunOptions::new(10_000)).unwrap();
    assert!((t.last().x[0] - 1.0).abs() <= 1e-3);
    assert!((t.last().lambda[0] - 2.0).abs() <= 1e-3);
    let t = run(&p, &Scheme::Penalized { c_g: &[2.0], c_h: &[] }, ConvexQuad::initial_point(), &PrimalOptConfig::gd(0.1), &DualOptConfig::ga(0.05), &RunOptions::new(1000)).unwrap();
    assert!((t.last().x[0] - 1.0).abs() <= 1e-6);
}

#[test]
fn single_precision_run_tracks_double() {
    let p = Concave2D::new(0.5f32).unwrap();
    let t = run(&p, &Scheme::Lagrangian, Concave2D::initial_point(), &PrimalOptConfig::gd(0.01f32), &DualOptConfig::nupi(0.3, 40.0), &RunOptions::new(10_000)).unwrap();
    assert!((t.last().x[0] - 0.5f32.asin()).abs() <= 1e-3);
}

#[test]
fn proxy_and_penalized_rate_runs() {
    let data = make_gaussian_mixture(&GaussianMixtureSpec::<f64>::default()).unwrap();
    let truth = RateProblem::new(data, 0.7).unwrap().with_constraint(RateConstraint::True);
    let sur = truth.with_constraint(RateConstraint::Surrogate);
    let x0 = RateProblem::initial_point();
    let primal = PrimalOptConfig::gd(0.02);
    let opts = RunOptions::new(10_000);
    let report = |x: &[f64]| rate_eval(&truth, &DVector::from_row_slice(x)).unwrap();
    for eta in [1e-2, 1.0] {
        let t = run(&truth, &Scheme::Proxy { surrogate: &sur }, x0.clone(), &primal, &DualOptConfig::ga(eta), &opts).unwrap();
        let r = report(t.final_x());
        assert!((r.true_rate - 0.7).abs() <= 0.01, "eta {eta}: rate {}", r.true_rate);
        assert!((r.accuracy - 0.8).abs() <= 0.03, "eta {eta}: accuracy {}", r.accuracy);
    }
    for (c, check) in [(0.1, (|r: f64| (r - 0.5).abs() <= 0.02) as fn(f64) -> bool), (10.0, |r: f64| r >= 0.99)] {
        let t = run(&sur, &Scheme::Penalized { c_g: &[c], c_h: &[] }, x0.clone(), &primal, &DualOptConfig::ga(1.0), &opts).unwrap();
        let r = report(t.final_x());
        assert!(check(r.true_rate), "c {c}: rate {}", r.true_rate);
    }
}

#[test]
fn runs_are_bitwise_repeatable() {
    let a = concave_run(0.3, Scheme::Lagrangian, DualOptConfig::nupi(0.3, 40.0));
    let b = concave_run(0.3, Scheme::Lagrangian, DualOptConfig::nupi(0.3, 40.0));
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    let back = Trace::<f64>::read_csv(ca.as_slice()).unwrap();
    assert_eq!(back.records.len(), a.records.len());
}

#[test]
fn oscillation_verdicts_survive_subsampling_by_two() {
    use lagrangekit::diagnostics::detect_oscillation_series;
    for (dual, expected) in [
        (DualOptConfig::ga(0.3), OscillationVerdict::Oscillating),
        (DualOptConfig::nupi(0.3, 40.0), OscillationVerdict::Converged),
    ] {
        let t = concave_run(0.5, Scheme::Lagrangian, dual);
        let xs: Vec<f64> = t.coordinate(0);
        let half: Vec<f64> = xs.iter().step_by(2).copied().collect();
        assert_eq!(detect_oscillation_series(&xs, 1000, 1e-2).verdict, expected);
        assert_eq!(detect_oscillation_series(&half, 500, 1e-2).verdict, expected);
    }
}
