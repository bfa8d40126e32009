//! Graph convolution, shared-weight residual blocks and max-pool readout.

mod layers;
mod params;

use thiserror::Error;

use crate::numcore::TensorError;

pub use layers::{sym_normalize, GcnLayer, Linear, Readout, ResidualBlock};
pub use params::{glorot_uniform, Bound, ParamId, ParamStore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GnnError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("adjacency of shape {0:?} is not square")]
    NotSquare(Vec<usize>),
    #[error("adjacency entry ({i}, {j}) = {value} is negative or not finite")]
    NegativeEdge { i: usize, j: usize, value: f64 },
    #[error("adjacency entry ({i}, {j}) = {value} is not 0/1")]
    FractionalEdge { i: usize, j: usize, value: f64 },
    #[error("adjacency is asymmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("node feature width {found}, expected {expected}")]
    Width { expected: usize, found: usize },
}
