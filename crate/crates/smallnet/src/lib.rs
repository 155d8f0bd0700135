//! Small dense networks with Hard Concrete unit gates, trained under a
//! model-density penalty or constraint.

pub mod checkpoint;
pub mod data;
pub mod gates;
pub mod net;
pub mod train;

pub use data::{benchmark_split, synthetic_digits, ImageSet, SyntheticDigitsSpec, BENCHMARK_TRAIN};
pub use gates::{density, expected_l0, hard_concrete_sample, GateParams};
pub use net::{DenseNet, DenseNetSpec};
pub use train::{forward_backward, train, Formulation, SparsityProblem, TrainConfig, TrainReport, Trained};

pub type DenseNet64 = DenseNet<f64>;
pub type DenseNet32 = DenseNet<f32>;
pub type GateParams64 = GateParams<f64>;
pub type ImageSet32 = ImageSet<f32>;
pub type ImageSet64 = ImageSet<f64>;
