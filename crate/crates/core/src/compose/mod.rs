//! Parameter-set composition: task parameters as linear combinations of a
//! shared set of parameter vectors.
//!
//! A [`ParameterSet`] holds `K` flat vectors of dimension `n`; a task's
//! parameters are `θ_τ = Σ_i w_{τ,i} φ_i`. The per-layer view of the same
//! rule is [`CompositionalLayer`], which mixes `K` weight/bias banks with the
//! compositional vector before applying an affine map.

mod init;
mod layer;
mod params;
mod scope;

pub use init::{build_structured_multihead, init_identical, init_w, init_plain, WInit};
pub use layer::{affine, CompositionalLayer, LayerOutput};
pub use params::{
    compose, compose_slice, normalized, w_gradient, CompositionalMatrix, ParameterSet, TaskParams,
};
pub use scope::{CompositionScope, LayerShape, MlpLayout};
