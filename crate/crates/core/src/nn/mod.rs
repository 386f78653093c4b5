//! Minimal dense neural-network kernel: matrices, reverse-mode
//! autodiff, graph layers (GCN, GAT, gated/GRU message passing), fully
//! connected layers and Adam.

pub mod layers;
pub mod matrix;
pub mod optim;
pub mod tape;

pub use layers::{
    adjacency_with_self_loops, fc_forward, fc_forward_t, gat_forward, gat_forward_t, gcn_forward,
    gcn_forward_t, ggnn_forward, ggnn_forward_t, glorot_uniform, normalize_adjacency, softmax,
    Activation, FcParams, GatParams, GcnParams, GgnnParams, GgnnVars, LayerParams,
    LEAKY_RELU_SLOPE,
};
pub use matrix::Matrix;
pub use optim::{Adam, AdamConfig};
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("state error: {0}")]
    State(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
