//! Sparsity-constrained training: penalized (`CE + c * density`) or
//! Lagrangian (`CE + lambda * (density - target)`, lambda by dual ascent).

use lagrangekit::model::{DualState, ViolationVector};
use lagrangekit::optimizers::{dual_ga_step, PrimalOptConfig, PrimalOptimizer};
use lagrangekit::scalar::Scalar;
use lagrangekit::{Error, Result};
use nalgebra::DVector;
use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::ImageSet;
use crate::gates::{density, expected_l0, GateParams, DEFAULT_DROPRATE};
use crate::net::{accuracy, loss_and_gradients, DenseNet, DenseNetSpec, GateValues, Gradients};

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityProblem<T: Scalar> {
    pub net: DenseNet<T>,
    pub gates: GateParams<T>,
    pub data: ImageSet<T>,
    /// Upper level on the expected density.
    pub density_target: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackward<T: Scalar> {
    pub loss: T,
    pub density: T,
    /// Cross-entropy gradients; `log_alpha` excludes any sparsity term.
    pub grads: Gradients<T>,
}

impl<T: Scalar> SparsityProblem<T> {
    pub fn new(net: DenseNet<T>, gates: GateParams<T>, data: ImageSet<T>, density_target: T) -> Result<Self> {
        if gates.len() != net.spec.num_gates() {
            return Err(Error::contract("one gate per input feature and hidden unit is required"));
        }
        if data.pixels.ncols() != net.spec.input_dim() {
            return Err(Error::contract("image size differs from the network input width"));
        }
        if !(density_target > T::zero() && density_target <= T::one()) {
            return Err(Error::contract("density target must lie in (0, 1]"));
        }
        Ok(Self { net, gates, data, density_target })
    }
}

/// Uniform draws on the open interval, one per gate.
pub fn gate_noise<T: Scalar, R: Rng>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.sample::<f64, _>(Open01))).collect()
}

/// One gate sample from `rng`, then loss and gradients on the batch rows.
pub fn forward_backward<T: Scalar, R: Rng>(
    problem: &SparsityProblem<T>,
    batch: &[usize],
    rng: &mut R,
) -> Result<ForwardBackward<T>> {
    let u = gate_noise(problem.gates.len(), rng);
    forward_backward_with_noise(problem, batch, &u)
}

/// As [`forward_backward`] with the uniform draws supplied.
pub fn forward_backward_with_noise<T: Scalar>(
    problem: &SparsityProblem<T>,
    batch: &[usize],
    u: &[T],
) -> Result<ForwardBackward<T>> {
    if batch.is_empty() {
        return Err(Error::contract("batch must be nonempty"));
    }
    if batch.iter().any(|&i| i >= problem.data.len()) {
        return Err(Error::contract("batch index out of range"));
    }
    let (z, dz) = problem.gates.sample(u)?;
    let (x, y) = problem.data.gather(batch);
    let (loss, grads) = loss_and_gradients(&problem.net, &x, &y, Some(GateValues { z: &z, dz: Some(&dz) }))?;
    Ok(ForwardBackward {
        loss,
        density: density(&problem.gates),
        grads,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Formulation<T> {
    /// No gates at all.
    Dense,
    Penalized { c: T },
    Lagrangian { target: T, dual_lr: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub batch_size: usize,
    /// Adam step for weights and biases.
    pub lr: T,
    /// Adam step for the gate log-alphas.
    pub gate_lr: T,
    pub droprate: f64,
    /// Overrides the droprate initialization (e.g. `+inf` freezes gates open).
    pub initial_log_alpha: Option<T>,
    pub seed: u64,
    pub formulation: Formulation<T>,
}

impl<T: Scalar> TrainConfig<T> {
    /// 20 epochs of batch 256, Adam 1e-3 on weights and 0.1 on gates. The
    /// larger gate step keeps the total gate drift of a long run (many more
    /// steps at 1e-3) within a 20-epoch budget.
    pub fn scaled_default(formulation: Formulation<T>) -> Self {
        Self {
            epochs: 20,
            batch_size: 256,
            lr: T::lit(1e-3),
            gate_lr: T::lit(0.1),
            droprate: DEFAULT_DROPRATE,
            initial_log_alpha: None,
            seed: 0,
            formulation,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::contract("epochs and batch size must be at least 1"));
        }
        if !(self.lr > T::zero() && self.gate_lr >= T::zero()) {
            return Err(Error::contract("learning rates must be positive"));
        }
        match self.formulation {
            Formulation::Penalized { c } if !(c >= T::zero()) => {
                Err(Error::contract("penalty coefficient must be nonnegative"))
            }
            Formulation::Lagrangian { target, dual_lr }
                if !(target > T::zero() && target <= T::one() && dual_lr > T::zero()) =>
            {
                Err(Error::contract("Lagrangian training needs target in (0, 1] and a positive dual step"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    /// Expected density after training (1 for ungated networks).
    pub density: T,
    /// Test accuracy with deterministic gates.
    pub accuracy: T,
    /// Mean training cross-entropy over the final epoch.
    pub final_loss: T,
    pub lambda: Option<T>,
    pub epoch_density: Vec<T>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained<T: Scalar> {
    pub net: DenseNet<T>,
    pub gates: Option<GateParams<T>>,
    pub report: TrainReport<T>,
}

/// Train on `train`, report on `test`. Batches are drawn from one ChaCha
/// stream and gate noise from another, so gating never perturbs the data
/// order.
pub fn train<T: Scalar>(
    spec: DenseNetSpec,
    train: &ImageSet<T>,
    test: &ImageSet<T>,
    cfg: &TrainConfig<T>,
) -> Result<Trained<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(2);

    let net = DenseNet::init(spec.clone(), &mut init_rng);
    let gated = !matches!(cfg.formulation, Formulation::Dense);
    let gates = if gated {
        let mut g = GateParams::with_droprate(spec.num_gates(), cfg.droprate)?;
        if let Some(la) = cfg.initial_log_alpha {
            g.log_alpha.fill(la);
        }
        g
    } else {
        GateParams::new(DVector::zeros(0), T::one(), -T::one(), T::one())?
    };
    let target = match cfg.formulation {
        Formulation::Lagrangian { target, .. } => target,
        _ => T::one(),
    };
    let mut problem = SparsityProblem {
        net,
        gates,
        data: train.clone(),
        density_target: target,
    };
    let mut w_opt = PrimalOptimizer::new(PrimalOptConfig::adam(cfg.lr), spec.num_params())?;
    let mut g_opt = PrimalOptimizer::new(PrimalOptConfig::adam(cfg.gate_lr.max(T::lit(1e-300))), spec.num_gates())?;
    let n_gates = T::from_usize_lossy(spec.num_gates().max(1));
    let mut dual = DualState::zeros(1, 0);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_density = Vec::with_capacity(cfg.epochs);
    let mut final_loss = T::zero();
    let mut steps = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = T::zero();
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = if gated {
                let fb = forward_backward(&problem, batch, &mut noise_rng)?;
                (fb.loss, fb.grads)
            } else {
                let (x, y) = problem.data.gather(batch);
                loss_and_gradients(&problem.net, &x, &y, None)?
            };
            if gated {
                let weight = match cfg.formulation {
                    Formulation::Penalized { c } => c,
                    Formulation::Lagrangian { dual_lr, .. } => {
                        let viol = ViolationVector {
                            viol_g: DVector::from_element(1, density(&problem.gates) - target),
                            viol_h: DVector::zeros(0),
                        };
                        dual = dual_ga_step(&dual, &viol, dual_lr);
                        dual.lambda[0]
                    }
                    Formulation::Dense => T::zero(),
                };
                let (_, dl0) = expected_l0(&problem.gates);
                let g_total = grads.log_alpha + dl0 * (weight / n_gates);
                if cfg.gate_lr > T::zero() {
                    problem.gates.log_alpha = g_opt.step(&problem.gates.log_alpha, &g_total);
                }
            }
            problem.net.params = w_opt.step(&problem.net.params, &grads.params);
            loss_sum += loss;
            batches += 1;
            steps += 1;
        }
        final_loss = loss_sum / T::from_usize_lossy(batches);
        epoch_density.push(if gated { density(&problem.gates) } else { T::one() });
    }
    let det = gated.then(|| problem.gates.deterministic());
    let acc = if test.is_empty() {
        T::zero()
    } else {
        accuracy(&problem.net, &test.pixels, &test.labels, det.as_ref())?
    };
    Ok(Trained {
        report: TrainReport {
            density: if gated { density(&problem.gates) } else { T::one() },
            accuracy: acc,
            final_loss,
            lambda: matches!(cfg.formulation, Formulation::Lagrangian { .. }).then(|| dual.lambda[0]),
            epoch_density,
            steps,
        },
        net: problem.net,
        gates: gated.then_some(problem.gates),
    })
}
