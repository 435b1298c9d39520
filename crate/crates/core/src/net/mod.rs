//! Policy/value network: features, model, optimizer, checkpoints.

pub mod checkpoint;
pub mod features;
pub mod model;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use features::{feature_width, featurize, FeatureMatrix};
pub use model::{Adam, NetOutput, NetParams, NetShape, Sample, DEFAULT_HIDDEN, DEFAULT_L2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("no action rows")]
    NoActions,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint built for feature width {found}, expected {expected}")]
    Incompatible { expected: usize, found: usize },
    #[error("io: {0}")]
    Io(String),
}

/// Network sized for a problem dimensionality with the default hidden width.
pub fn default_shape(dim: crate::env::Dim) -> NetShape {
    NetShape::new(feature_width(dim), DEFAULT_HIDDEN)
}
