use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which layers of the agent's networks draw their parameters from `Φ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CompositionScope {
    /// Every layer of the actor and both critics.
    #[default]
    AcShared,
    /// Every actor layer; critics are plain shared networks.
    ActorOnly,
    /// Only the output layer of each network.
    OutputOnly,
}

impl CompositionScope {
    /// Whether layer `layer` of `layers` in the actor (or a critic) is compositional.
    pub fn is_compositional(self, is_actor: bool, layer: usize, layers: usize) -> bool {
        match self {
            CompositionScope::AcShared => true,
            CompositionScope::ActorOnly => is_actor,
            CompositionScope::OutputOnly => layer + 1 == layers,
        }
    }
}

impl fmt::Display for CompositionScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompositionScope::AcShared => "ac-shared",
            CompositionScope::ActorOnly => "actor-only",
            CompositionScope::OutputOnly => "output-only",
        })
    }
}

impl FromStr for CompositionScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ac-shared" => Ok(CompositionScope::AcShared),
            "actor-only" => Ok(CompositionScope::ActorOnly),
            "output-only" => Ok(CompositionScope::OutputOnly),
            other => Err(Error::Config(format!(
                "unknown scope '{other}' (expected ac-shared, actor-only or output-only)"
            ))),
        }
    }
}

/// Shape of one fully connected layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub d_in: usize,
    pub d_out: usize,
}

impl LayerShape {
    pub fn new(d_in: usize, d_out: usize) -> Self {
        LayerShape { d_in, d_out }
    }

    /// Weight (`d_in × d_out`, row-major) followed by bias (`d_out`).
    pub fn param_count(&self) -> usize {
        self.d_in * self.d_out + self.d_out
    }
}

/// Layer shapes of an MLP, `sizes = [input, hidden.., output]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpLayout {
    pub layers: Vec<LayerShape>,
}

impl MlpLayout {
    pub fn from_sizes(sizes: &[usize]) -> Self {
        MlpLayout {
            layers: sizes.windows(2).map(|w| LayerShape::new(w[0], w[1])).collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerShape::param_count).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.d_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.d_out)
    }
}
