//! Deterministic network math shared by every inference backend.
//!
//! Tensors are row-major `f64`. Images use `[rows, cols, channels]` layout and
//! convolutions are unpadded. Weights for a whole network live in one flat
//! [`WeightVector`], laid out layer by layer (weights, then biases).

mod adam;
mod dropout;
mod loss;
mod network;
mod spec;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use dropout::{sample_dropout_mask, DropoutMask};
pub use loss::{cross_entropy, cross_entropy_logit_grad, softmax, PROB_FLOOR};
pub use network::{backward, forward, init_weights, logits, loss_and_gradient, Gradient};
pub use spec::{LayerKind, LayerSpec, NetworkSpec};
pub use tensor::{Tensor, WeightVector};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("weight vector has {actual} entries, network needs {expected}")]
    WeightLength { expected: usize, actual: usize },
    #[error("dropout mask does not match the network: {0}")]
    Mask(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
}

pub type Result<T> = std::result::Result<T, NnError>;
