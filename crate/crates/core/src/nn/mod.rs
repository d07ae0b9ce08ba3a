//! Dense ReLU networks with explicit reverse-mode gradients and Adam.
//!
//! Everything runs in `f64`. The output layer is a single linear logit; the
//! sigmoid is applied by callers.

mod adam;
mod checkpoint;
mod gradcheck;
mod loss;
mod net;

pub use adam::{adam_step, AdamState};
pub use checkpoint::NetworkCheckpoint;
pub use gradcheck::numeric_gradient;
pub use loss::{bce_loss, sigmoid, PROB_EPS};
pub use net::{init_network, Dense, DenseNet, ForwardCache, GradientSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid layer dims {0:?}: need at least two positive sizes ending in 1")]
    InvalidDims(Vec<usize>),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),

    #[error("learning rate must be positive, got {0}")]
    InvalidLearningRate(f64),

    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint format: {0}")]
    Format(String),
}
