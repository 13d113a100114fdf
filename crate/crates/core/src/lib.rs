//! Checkpoint weight surgery for restoring plasticity before fine-tuning.
//!
//! The crate is organised around the surgery pipeline and the harness that
//! evaluates it:
//!
//! - [`tensor_store`]: the checkpoint container format and parameter classes
//! - [`surgery`]: utility scoring, pruning, reinitialization, bias reset
//! - [`stats`]: run summaries and the one-sided Mann-Whitney U test
//! - [`analysis`]: weight-distribution histograms and CSV/SVG export
//! - [`tinytrain`]: a small MLP trainer and the repeated-run experiment protocol
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod rng;
pub mod stats;
pub mod surgery;
pub mod tensor_store;
pub mod tinytrain;

pub use error::{Error, Result};
pub use surgery::{apply_surgery, parse_config_tag, SurgeryConfig, SurgeryReport};
pub use tensor_store::{load_checkpoint, save_checkpoint, Checkpoint, ClassificationRules, ParamClass, Tensor};
