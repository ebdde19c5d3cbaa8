//! Reverse-mode automatic differentiation over a recorded tape, the neural
//! building blocks used by every learned component, and an Adam optimizer.

pub mod checkpoint;
pub mod kernels;
mod optim;
mod params;
mod tape;
mod tensor;

pub use kernels::{attention, conv2d, matmul, softmax};
pub use optim::Adam;
pub use params::{glorot_uniform, Bound, Dense, ParamGrads, ParamId, ParamSet};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
