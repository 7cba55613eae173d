//! Three-layer network with square activation: plaintext oracle and encrypted path.

pub mod encrypted;
mod plain;
mod train;

pub use plain::{backward, forward, sgd_step, Batch, ForwardTrace, ModelParams};
pub use train::{
    evaluate, max_weight_divergence, train, train_from, Evaluation, GradScale, Halt, IterationRecord, TrainBackend,
    TrainConfig, TrainData, TrainingReport,
};
