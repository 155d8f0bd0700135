use lagrangekit_smallnet::gates::{expected_l0, hard_concrete_sample, GateParams, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA};
use lagrangekit_smallnet::{benchmark_split, synthetic_digits, train, DenseNetSpec, Formulation, ImageSet, SyntheticDigitsSpec, TrainConfig};
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #[test]
    fn samples_lie_in_the_unit_interval(la in -20.0..20.0f64, u in 1e-9..(1.0 - 1e-9)) {
        let (z, dz) = hard_concrete_sample(la, DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA, u).unwrap();
        prop_assert!((0.0..=1.0).contains(&z));
        prop_assert!(dz >= 0.0);
    }

    #[test]
    fn expected_l0_is_bounded_and_monotone(las in prop::collection::vec(-10.0..10.0f64, 1..20), i in 0usize..20, bump in 0.0..5.0f64) {
        let gates = GateParams::new(DVector::from_vec(las.clone()), DEFAULT_BETA, DEFAULT_GAMMA, DEFAULT_ZETA).unwrap();
        let (l0, _) = expected_l0(&gates);
        prop_assert!(l0 >= 0.0 && l0 <= las.len() as f64);
        let mut up = gates.clone();
        up.log_alpha[i % las.len()] += bump;
        prop_assert!(expected_l0(&up).0 >= l0);
    }
}

fn small_data() -> (ImageSet<f64>, ImageSet<f64>) {
    let all = synthetic_digits(&SyntheticDigitsSpec { n: 300, side: 8, classes: 3, ..Default::default() }).unwrap();
    (all.slice(0, 240).unwrap(), all.slice(240, 300).unwrap())
}

fn small_cfg(f: Formulation<f64>) -> TrainConfig<f64> {
    TrainConfig { epochs: 3, batch_size: 32, ..TrainConfig::scaled_default(f) }
}

#[test]
fn gates_frozen_open_leave_training_bitwise_unchanged() {
    let (tr, te) = small_data();
    let spec = DenseNetSpec::new(vec![64, 16, 8, 3]).unwrap();
    let dense = train(spec.clone(), &tr, &te, &small_cfg(Formulation::Dense)).unwrap();
    let mut cfg = small_cfg(Formulation::Penalized { c: 0.5 });
    cfg.initial_log_alpha = Some(f64::INFINITY);
    let frozen = train(spec, &tr, &te, &cfg).unwrap();
    assert_eq!(dense.net.params, frozen.net.params);
    assert_eq!(dense.report.accuracy, frozen.report.accuracy);
    assert_eq!(frozen.report.density, 1.0);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let (tr, te) = small_data();
    let spec = DenseNetSpec::new(vec![64, 16, 3]).unwrap();
    let cfg = small_cfg(Formulation::Penalized { c: 0.1 });
    let a = train(spec.clone(), &tr, &te, &cfg).unwrap();
    let b = train(spec.clone(), &tr, &te, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(spec, &tr, &te, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.net.params, c.net.params);
}

#[test]
fn stronger_penalty_gives_sparser_models() {
    let (tr, te) = small_data();
    let spec = DenseNetSpec::new(vec![64, 16, 3]).unwrap();
    let dens: Vec<f64> = [1e-3, 1.0, 30.0]
        .iter()
        .map(|&c| train(spec.clone(), &tr, &te, &small_cfg(Formulation::Penalized { c })).unwrap().report.density)
        .collect();
    assert!(dens[0] > dens[1] && dens[1] > dens[2], "{dens:?}");
}

#[test]
fn lagrangian_training_pulls_density_to_the_target() {
    let (tr, te): (ImageSet<f32>, _) = benchmark_split(0).unwrap();
    let cfg = TrainConfig::scaled_default(Formulation::Lagrangian { target: 0.5, dual_lr: 0.01 });
    let out = train(DenseNetSpec::scaled_default(), &tr, &te, &cfg).unwrap();
    // Feasible, and not far below the target.
    assert!(out.report.density <= 0.5 && out.report.density >= 0.47, "density {}", out.report.density);
    assert!(out.report.lambda.unwrap() >= 0.0);
}

#[test]
fn invalid_configs_rejected() {
    let (tr, te) = small_data();
    let spec = DenseNetSpec::new(vec![64, 3]).unwrap();
    for f in [Formulation::Penalized { c: -1.0 }, Formulation::Lagrangian { target: 0.0, dual_lr: 0.1 }] {
        assert!(train(spec.clone(), &tr, &te, &small_cfg(f)).is_err());
    }
    assert!(train(spec, &tr, &te, &TrainConfig { epochs: 0, ..small_cfg(Formulation::Dense) }).is_err());
}
