//! Edge-splitting message-passing predictor for weighted MaxSAT: a small
//! reverse-mode tape over dense matrices, the network itself, AdamW
//! training, and checkpoints.

pub mod checkpoint;
pub mod model;
pub mod optim;
pub mod tape;
pub mod tensor;
pub mod train;

pub use model::{ClassPairing, GraphInputs, ModelConfig, SplitGnn};
pub use train::{TrainConfig, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("clause weight vector has length {found}, graph has {expected} clauses")]
    WeightLength { expected: usize, found: usize },
    #[error("label has length {found}, instance has {expected} variables")]
    LabelLength { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
