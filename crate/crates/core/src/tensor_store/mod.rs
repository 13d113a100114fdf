//! Checkpoint storage: tensors, the on-disk container format, and the
//! weight/bias/excluded classification that drives surgery.

mod checkpoint;
mod classify;
mod format;
mod tensor;

pub use checkpoint::Checkpoint;
pub use classify::{classify_params, ClassificationRules, ParamClass};
pub use format::{decode, encode, load_checkpoint, load_checkpoint_with, save_checkpoint, LoadOptions};
pub use tensor::{DType, Tensor, TensorData};
