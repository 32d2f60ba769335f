//! Small feed-forward networks with hand-written backpropagation and plain SGD.

mod checkpoint;
pub mod gradcheck;
mod layers;
mod model;
mod tensor;

pub use checkpoint::Checkpoint;
pub use layers::{Conv1d, Dense, Flatten, MaxPool1d, Relu};
pub use model::{CnnArchitecture, DnnArchitecture, Gradients, Layer, Model, PoolSize};
pub use tensor::Tensor1D;
