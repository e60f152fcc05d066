//! Dense tensors with hand-written forward/backward passes for a fixed
//! layer set: convolution, ReLU, residual blocks, max-pooling, dense
//! layers, the two losses and Adam.
//!
//! There is no dynamic graph. Each layer records what it needs in
//! `forward_train` and consumes it in `backward`, which accumulates
//! parameter gradients and returns the gradient for its input.

mod adam;
mod checkpoint;
mod conv;
mod layers;
mod loss;
mod scalar;
#[allow(clippy::module_inception)]
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointFile, NamedArray, CHECKPOINT_MAGIC};
pub use conv::{Conv2d, ConvSpec};
pub use layers::{Dense, MaxPool2d, Relu, ResidualBlock};
pub use loss::{rmse_loss, softmax, softmax_xent, RMSE_EPS};
pub use scalar::Scalar;
pub use tensor::Tensor;
