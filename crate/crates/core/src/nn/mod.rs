//! Spatio-temporal graph convolutional network: tensors, graph and temporal
//! convolutions, a 3-block classifier with exact reverse-mode gradients, and
//! SGD training.

mod checkpoint;
mod gconv;
mod loss;
mod model;
mod optim;
mod real;
mod tconv;
mod tensor;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
pub use gconv::{graph_conv, graph_conv_reference, GraphConvParams, ReferenceNorm};
pub use loss::{argmax, cross_entropy, cross_entropy_grad, softmax};
pub use model::{Architecture, Gradients, Model, StBlock, Tape};
pub use optim::{Sgd, SgdConfig};
pub use real::Real;
pub use tconv::{temporal_conv, TemporalConvParams};
pub use tensor::Tensor3;
pub use train::{accuracy, epoch_order, predict, train_epoch, EpochLog, Example};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weights have {weights} partitions but the graph has {graph}")]
    PartitionMismatch { weights: usize, graph: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("gradient tape does not match the model")]
    TapeIncomplete,
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
