//! Dense `f64` tensors and a tape-based reverse-mode differentiator.
//!
//! The op surface is what MLP actor/critic networks need: matrix products,
//! bias-add over the batch dimension, a handful of activations and the
//! squashed-Gaussian log-density used by the policy.

mod graph;
mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use tensor::{gemm, log1m_tanh_sq, matmul, softplus, Tensor};
