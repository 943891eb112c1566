//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its output
//! value and whatever it needs for the backward pass. [`Graph::backward`]
//! walks the tape once in reverse. Images use `[N, C, H, W]` layout.
//!
//! Everything is generic over [`Float`] so the same code runs in `f32` for
//! training and in `f64` for tight gradient verification.

mod adam;
mod float;
mod graph;
mod init;
mod ops;
mod tensor;

pub use adam::AdamState;
pub use float::{gemm, Float};
pub use graph::{Graph, NodeId};
pub use init::xavier_uniform;
pub use ops::{conv_out_len, pad_before, Padding};
pub use tensor::Tensor;
