//! Small CNN engine: conv/pool/dense kernels with hand-written backward
//! passes, SCCE loss, Adam, and a binary model container.

mod io;
pub mod layers;
mod model;
mod optim;
mod tensor;
mod train;

use thiserror::Error;

pub use io::{load_model, save_model, ModelHeader, TensorSpec, FORMAT_VERSION, MAGIC};
pub use model::{accumulate, loss_scce, ArchConfig, ForwardCache, FusionCnnModel, Mode, PARAM_NAMES};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use tensor::Tensor;
pub use train::{accuracy, batch_gradients, mean_loss, predict_all, train_epoch, Example, DEFAULT_BATCH_SIZE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("model mode {mode:?} called with metadata present = {metadata}")]
    ModeMismatch { mode: Mode, metadata: bool },
    #[error("label {0} outside the class range")]
    BadLabel(usize),
    #[error("forward cache does not belong to this model")]
    CacheMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite tensor value")]
    NonFinite,
    #[error("model file: {0}")]
    ModelFormat(String),
}
