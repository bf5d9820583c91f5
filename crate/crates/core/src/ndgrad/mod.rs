//! Minimal dense tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] remembers the op that produced it together with its inputs.
//! Calling [`Tensor::backward`] on a scalar walks that graph once in reverse
//! topological order and accumulates gradients into trainable leaves. Graphs
//! are built per forward pass and dropped afterwards; parameters live in a
//! [`ParamStore`] and are updated in place by [`Adam`].
//!
//! Broadcasting is limited to one-element tensors against anything.

mod adam;
mod checkpoint;
mod conv;
pub mod gradcheck;
pub mod init;
mod ops;
mod spectral;
mod tensor;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use checkpoint::{ParamStore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{conv_output_len, Padding};
pub use ops::{COSINE_EPS, LEAKY_SLOPE};
pub use spectral::LogMelOp;
pub use tensor::Tensor;
