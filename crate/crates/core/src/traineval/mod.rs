//! Optimization, learning-rate schedule, metrics, dataset splits and
//! checkpoints.

pub mod checkpoint;
mod data;
pub mod metrics;
mod optim;
mod split;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::fusion::FusionError;
use crate::numcore::TensorError;

pub use data::{
    prepare, with_samples, AffinityDataset, EmbeddingSpec, PairRecord, PreparedData, Sample,
    TargetRecord, AFFINITY_FILE, DRUGS_FILE, TARGETS_DIR,
};
pub use metrics::{MetricError, MetricSet};
pub use optim::{AdamConfig, AdamState, PlateauSchedule};
pub use split::{make_split, Exclusion, Part, Regime, Split, SplitSpec};
pub use train::{
    batch_gradient, evaluate_mse, predict_pairs, train, train_with, EpochRecord, TrainConfig,
    TrainOutcome,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] FusionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("gradient of parameter '{param}' is not finite")]
    NonFiniteGradient { param: String },
    #[error("gradient of parameter '{param}' has shape {found:?}, expected {expected:?}")]
    GradientShape {
        param: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid training configuration: {0}")]
    Config(String),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        Self::Model(e.into())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error(
        "unknown split regime '{0}' (expected warm, cold-target, cold-drug or cold-drug-target)"
    )]
    UnknownRegime(String),
    #[error("unknown split part '{0}' (expected train, val or test)")]
    UnknownPart(String),
    #[error("{regime} split needs at least 3 unique keys, found {keys}")]
    TooFewKeys { regime: Regime, keys: usize },
    #[error("{regime} split left the {part} part empty")]
    EmptyPart { regime: Regime, part: &'static str },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("{}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("target {id}: directory {} not found", dir.display())]
    MissingTarget { id: String, dir: PathBuf },
    #[error("target {id}: {reason}")]
    Target { id: String, reason: String },
    #[error("{} malformed record(s):\n  {}", .0.len(), .0.join("\n  "))]
    Records(Vec<String>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("{}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checkpoint does not match the model: {0}")]
    Mismatch(String),
}
