//! Small neural-network toolkit: 2D tensors, a reverse-mode tape, the
//! layer kinds used by the actor and critic, Adam, and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::{Checkpoint, NamedTensor};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{
    cosine_cutoff, gaussian_rbf, Activation, CfConv, Dense, Embedding, GraphAttention, GraphEdges, LayerKind,
    LayerSpec, PairGeometry, SoftmaxHead,
};
pub use optim::{Adam, PlateauScheduler};
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NnError {
    #[error("non-finite value produced by {op}")]
    NonFinite { op: String },
    #[error("non-finite gradient produced by {op}")]
    NanGradient { op: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid layer spec: {0}")]
    Spec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
