//! Minimal deterministic tensor and reverse-mode automatic-differentiation engine.
//!
//! Provides exactly the layer set a small metadata-fused CNN regressor needs:
//! 3×3 same-padding convolution, ReLU, additive skip connections, global max
//! pooling, feature concatenation, dense layers, MSE loss, and Adam.
//!
//! Design constraints:
//! - **Determinism**: identical seeds produce bit-identical results for any
//!   worker-thread count. Every parallel loop writes to a disjoint output
//!   slice and every reduction runs in a fixed order (see [`par`]).
//! - **Precision**: element storage is generic over [`Element`] (`f32` for
//!   production, `f64` for gradient checking); dense, loss, and optimizer
//!   reductions accumulate in 64-bit regardless of storage width, while the
//!   convolution stencils accumulate in the element type (in a fixed order)
//!   so the hot loops vectorize at the native lane width.
//! - **Static graphs**: a [`Graph`] is built once via [`GraphBuilder`], after
//!   which forward/backward passes borrow it immutably, so a trained model is
//!   freely shareable across threads for inference.

mod adam;
mod checkpoint;
mod element;
mod error;
mod graph;
mod loss;
pub mod ops;
pub mod par;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointEntry, CheckpointError};
pub use element::Element;
pub use error::GraphError;
pub use graph::{Activations, Gradients, Graph, GraphBuilder, NodeId, NodeShape};
pub use loss::{mse_loss, mse_loss_grad};
pub use tensor::Tensor;
