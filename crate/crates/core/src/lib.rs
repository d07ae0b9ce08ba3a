//! Adversarially debiased recidivism prediction.
//!
//! A predictor network is trained jointly with an adversary that tries to
//! recover a binary protected group from the predictor's logit. The
//! predictor minimizes `L_y - alpha * L_d`, trading a little accuracy for
//! outputs that satisfy demographic parity or equalized odds.
//!
//! The crate is organized by subsystem:
//!
//! - [`data`]: CSV ingestion, one-hot encoding, splitting and standardization.
//! - [`nn`]: dense ReLU networks with hand-written backprop and Adam.
//! - [`train`]: the debiasing strategy registry and the coupled training loop.
//! - [`metrics`]: high-risk, false-positive and false-negative gaps, AUC,
//!   accuracy and calibration tables.
//! - [`explain`]: permutation importance and per-record ablation.
//! - [`report`]: report rendering, run manifests and key-value config files.
//! - [`pipeline`]: end-to-end orchestration used by the command-line driver.

pub mod data;
pub mod explain;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod train;

pub use data::{Dataset, FeatureSchema, RawRecord, Scaler, SplitSpec};
pub use metrics::{FairnessReport, GroupedPredictions};
pub use nn::DenseNet;
pub use train::{DebiasStrategy, StrategyRegistry, TrainConfig, TrainedPair};
