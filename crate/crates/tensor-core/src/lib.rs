//! Dense `f64` tensors with reverse-mode automatic differentiation and the
//! small set of neural-network primitives the detector needs: same-padded
//! convolution, batch normalization, 2x2 max pooling, nearest-neighbor
//! upsampling, dense layers, activations, spatial softmax, reductions and
//! channel concatenation.
//!
//! Everything runs on the CPU in double precision. Forward operations are
//! deterministic: identical inputs produce bit-identical outputs.

mod autograd;
pub mod check;
mod error;
pub mod ops;
mod tensor;

pub use autograd::{backward, Graph};
pub use error::{Result, TensorError};
pub use tensor::{no_grad, Tensor};
