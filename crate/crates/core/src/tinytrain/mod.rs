//! A small self-contained trainer and the repeated-run transfer protocol.
//!
//! The MLP here stands in for full-size vision backbones: it exposes the
//! same surface surgery needs (weights and biases in a checkpoint, gradients
//! for the gradient utility) at a size that trains in seconds on a CPU.

mod data;
mod experiment;
mod mlp;
mod saturation;
mod train;

pub use data::{synth_transfer_tasks, Dataset, SplitDataset, TaskConfig, TransferTasks};
pub use experiment::{run_experiment, Case, ExperimentOutput, ExperimentResult, Protocol, DEMO_PROTOCOL};
pub use mlp::{
    argmax, bias_name, cross_entropy, random_batch, weight_name, Dense, ForwardCache, Gradients, Mlp, MlpSpec,
};
pub use saturation::{induce_saturation, SATURATION_STD};
pub use train::{accuracy, train, EarlyStopping, TrainConfig, TrainOutcome};
