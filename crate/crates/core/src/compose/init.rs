use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::params::{CompositionalMatrix, ParameterSet};
use super::scope::LayerShape;
use crate::error::{Error, Result};

/// Fan-in scaled uniform initialisation of a flat parameter vector laid
/// out as `[weight, bias]` per layer.
pub fn init_plain<R: Rng + ?Sized>(template: &[LayerShape], rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(template.iter().map(LayerShape::param_count).sum());
    for layer in template {
        let bound = 1.0 / (layer.d_in as f64).sqrt();
        for _ in 0..layer.param_count() {
            out.push(rng.random_range(-bound..bound));
        }
    }
    out
}

/// Randomly initialises one column and copies it into the other `K - 1`.
pub fn init_identical(template: &[LayerShape], k: usize, seed: u64) -> Result<ParameterSet> {
    if k == 0 {
        return Err(Error::Config("parameter set needs K >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = init_plain(template, &mut rng);
    ParameterSet::from_columns(vec![base; k])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WInit {
    #[default]
    Random,
    OneHot,
}

impl FromStr for WInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(WInit::Random),
            "one-hot" => Ok(WInit::OneHot),
            other => Err(Error::Config(format!("unknown w init '{other}'"))),
        }
    }
}

/// Initial compositional vectors for `tasks` tasks.
///
/// Random entries are `N(0, 1/K)`; one-hot sets `w_τ = e_τ` and needs `K >= T`.
pub fn init_w(tasks: usize, k: usize, mode: WInit, seed: u64, normalize: bool) -> Result<CompositionalMatrix> {
    let vectors = match mode {
        WInit::OneHot => {
            if k < tasks {
                return Err(Error::Config(format!(
                    "one-hot w init needs K >= T (K={k}, T={tasks})"
                )));
            }
            (0..tasks)
                .map(|t| {
                    let mut v = vec![0.0; k];
                    v[t] = 1.0;
                    v
                })
                .collect()
        }
        WInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scale = 1.0 / (k as f64).sqrt();
            (0..tasks)
                .map(|_| {
                    (0..k)
                        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        }
    };
    CompositionalMatrix::new(k, vectors, normalize)
}

/// Parameter set whose column `τ` stacks a shared trunk over head `ψ_τ`.
///
/// Composed with one-hot vectors this is a shared-trunk, per-task-head model.
pub fn build_structured_multihead(trunk: &[f64], heads: &[Vec<f64>]) -> Result<ParameterSet> {
    let Some(first) = heads.first() else {
        return Err(Error::Config("multi-head set needs at least one head".into()));
    };
    let columns = heads
        .iter()
        .map(|h| {
            if h.len() != first.len() {
                return Err(Error::dim("multi-head heads", &[first.len()], &[h.len()]));
            }
            let mut c = trunk.to_vec();
            c.extend_from_slice(h);
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    ParameterSet::from_columns(columns)
}
