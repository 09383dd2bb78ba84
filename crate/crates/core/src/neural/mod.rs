//! A small trainable substrate: matrices, a reverse-mode tape, named
//! parameters with checkpoints, Adam, and the layers the models need.

mod adam;
mod graph;
pub mod layers;
mod matrix;
mod params;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use graph::{Graph, RankGroup, Var};
pub use layers::Mode;
pub use matrix::Matrix;
pub use params::{Gradients, Parameters, Tensor, INIT_RANGE};

pub(crate) use graph::softmax_in_place;
