//! From-scratch multilayer perceptron, reverse-mode gradients and Adam.

mod adam;
mod format;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use format::{read_model, write_model, MODEL_FORMAT_HEADER};
pub use mlp::{ForwardCache, Gradients, Mlp};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid layer sizes: {0}")]
    InvalidLayers(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("model I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
