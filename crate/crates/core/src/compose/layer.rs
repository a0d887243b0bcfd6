use super::params::ParameterSet;
use super::scope::LayerShape;
use crate::diff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// A fully connected layer whose weight and bias are mixed from `K` banks:
/// `y = x · (Σ_i w_i V̂_i) + Σ_i w_i b̂_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionalLayer {
    shape: LayerShape,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

/// Graph handles created by [`CompositionalLayer::forward`].
pub struct LayerOutput {
    pub out: Var,
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

/// Plain affine map `x · weight + bias`.
pub fn affine(g: &mut Graph, x: Var, weight: Var, bias: Var) -> Result<Var> {
    let h = g.matmul(x, weight)?;
    g.add_bias(h, bias)
}

impl CompositionalLayer {
    pub fn new(weights: Vec<Tensor>, biases: Vec<Tensor>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::dim(
                "compositional layer banks",
                &[weights.len()],
                &[biases.len()],
            ));
        }
        let (d_in, d_out) = weights[0].dims2()?;
        for w in &weights {
            if w.shape() != [d_in, d_out] {
                return Err(Error::dim("compositional layer weight", &[d_in, d_out], w.shape()));
            }
        }
        for b in &biases {
            if b.shape() != [d_out] {
                return Err(Error::dim("compositional layer bias", &[d_out], b.shape()));
            }
        }
        Ok(CompositionalLayer {
            shape: LayerShape::new(d_in, d_out),
            weights,
            biases,
        })
    }

    /// Bank view of rows `offset..offset + shape.param_count()` of `Φ`.
    pub fn from_parameter_set(phi: &ParameterSet, offset: usize, shape: LayerShape) -> Result<Self> {
        let end = offset + shape.param_count();
        if end > phi.n() {
            return Err(Error::dim("layer view", &[phi.n()], &[offset, end]));
        }
        let split = offset + shape.d_in * shape.d_out;
        let mut weights = Vec::with_capacity(phi.k());
        let mut biases = Vec::with_capacity(phi.k());
        for i in 0..phi.k() {
            let col = phi.column(i);
            weights.push(Tensor::matrix(shape.d_in, shape.d_out, col[offset..split].to_vec())?);
            biases.push(Tensor::vector(col[split..end].to_vec()));
        }
        Self::new(weights, biases)
    }

    pub fn shape(&self) -> LayerShape {
        self.shape
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    /// Records the layer on `g` with every bank as a trainable leaf.
    ///
    /// `w` must be a length-K vector node; it is differentiated through too.
    pub fn forward(&self, g: &mut Graph, x: Var, w: Var) -> Result<LayerOutput> {
        if g.value(w).len() != self.k() {
            return Err(Error::dim("compositional forward", &[self.k()], g.value(w).shape()));
        }
        let (_, d_in) = g.value(x).dims2()?;
        if d_in != self.shape.d_in {
            return Err(Error::dim("compositional forward", g.value(x).shape(), &[self.shape.d_in, self.shape.d_out]));
        }
        let weights: Vec<Var> = self.weights.iter().map(|t| g.param(t.clone())).collect();
        let biases: Vec<Var> = self.biases.iter().map(|t| g.param(t.clone())).collect();
        let weight = g.weighted_sum(w, &weights)?;
        let bias = g.weighted_sum(w, &biases)?;
        let out = affine(g, x, weight, bias)?;
        Ok(LayerOutput {
            out,
            weights,
            biases,
        })
    }

    /// `(Σ_i w_i V̂_i, Σ_i w_i b̂_i)` evaluated eagerly.
    pub fn composed(&self, w: &[f64]) -> Result<(Tensor, Tensor)> {
        if w.len() != self.k() {
            return Err(Error::dim("compositional weights", &[self.k()], &[w.len()]));
        }
        let mix = |bank: &[Tensor]| {
            let mut acc: Vec<f64> = bank[0].data().iter().map(|x| w[0] * x).collect();
            for (wi, t) in w.iter().zip(bank).skip(1) {
                for (a, x) in acc.iter_mut().zip(t.data()) {
                    *a += wi * x;
                }
            }
            Tensor::new(bank[0].shape().to_vec(), acc)
        };
        Ok((mix(&self.weights)?, mix(&self.biases)?))
    }
}
