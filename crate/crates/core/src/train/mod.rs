//! Joint training of the predictor and its adversary.
//!
//! Per batch the adversary takes one Adam step on its own loss `L_d`, then
//! the predictor takes one Adam step on `L_y - alpha * L_d`, with the
//! `L_d` term reaching the predictor only through the adversary's input
//! gradient (adversary parameters held fixed).

mod strategy;
mod trainer;

pub use strategy::{adversary_input, Baseline, DebiasStrategy, EqualizedOdds, Parity, StrategyRegistry};
pub use trainer::{
    batch_gradients, coupled_loss, predict, train, train_with, BatchGradients, EpochRecord, TrainConfig, TrainedPair,
    ValidationMetrics,
};

use thiserror::Error;

use crate::data::DataError;
use crate::metrics::MetricError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("unknown mode {name:?} (known: {known})")]
    UnknownMode { name: String, known: String },

    #[error("baseline mode has no adversary")]
    NoAdversary,

    #[error("adversary input needs equal lengths: {logits} logits, {labels} labels")]
    LengthMismatch { logits: usize, labels: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("non-finite {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { loss: &'static str, epoch: usize, batch: usize },

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error("validation metrics: {0}")]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Data(#[from] DataError),
}
