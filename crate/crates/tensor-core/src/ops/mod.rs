//! Forward operations. Each records the backward function needed by
//! [`crate::backward`] when any operand is tracked.

mod conv;
mod elementwise;
mod linear;
mod norm;
mod pool;
mod reduce;
mod shape;
mod softmax;

pub use conv::conv2d;
pub use elementwise::{add, affine, clamp, ln, mul, relu, sigmoid};
pub use linear::dense;
pub use norm::{batch_norm, Mode, RunningStats};
pub use pool::{max_pool2, upsample2};
pub use reduce::{mean, sum};
pub use shape::{concat_channels, flatten, reshape};
pub use softmax::spatial_softmax;
