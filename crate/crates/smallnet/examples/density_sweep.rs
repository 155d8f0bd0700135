//! Density and accuracy against the penalty coefficient on the synthetic
//! sparsity benchmark.
//!
//! `cargo run --release -p lagrangekit-smallnet --example density_sweep -- [c...]`

use std::time::Instant;

use lagrangekit_smallnet::{benchmark_split, train, DenseNetSpec, Formulation, ImageSet, TrainConfig};

fn main() {
    let mut cs: Vec<f32> = std::env::args().skip(1).map(|s| s.parse().expect("coefficient")).collect();
    if cs.is_empty() {
        cs = vec![1e-3, 3.16e-2, 1.78e-1, 4.22e-1, 1.0];
    }
    let (tr, te): (ImageSet<f32>, _) = benchmark_split(0).unwrap();
    for c in cs {
        let started = Instant::now();
        // LAGRANGIAN=1 treats each value as a dual step toward 50% density.
        let formulation = if std::env::var_os("LAGRANGIAN").is_some() {
            Formulation::Lagrangian { target: 0.5, dual_lr: c }
        } else {
            Formulation::Penalized { c }
        };
        let cfg = TrainConfig::scaled_default(formulation);
        let out = train(DenseNetSpec::scaled_default(), &tr, &te, &cfg).unwrap();
        println!(
            "value={c:<10} density={:.4} acc={:.4} loss={:.4} lambda={:?} ({:.1}s)",
            out.report.density,
            out.report.accuracy,
            out.report.final_loss,
            out.report.lambda,
            started.elapsed().as_secs_f64()
        );
    }
}
