use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of loss maskout for one update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `J_τ` as computed, before masking.
    pub losses: Vec<f64>,
    /// Tasks with `J_τ > ε` (non-finite counts as exceeding).
    pub masked: Vec<usize>,
    /// `V = {j : J_j ≤ ε}`.
    pub valid: Vec<usize>,
    /// `J_Θ = Σ_{τ ∈ V} J_τ`.
    pub total: f64,
}

impl LossReport {
    pub fn is_masked(&self, task: usize) -> bool {
        self.masked.contains(&task)
    }
}

/// True when `loss` must be excluded: strictly above `epsilon`, NaN or `+∞`.
pub fn exceeds(loss: f64, epsilon: f64) -> bool {
    loss > epsilon || loss.is_nan()
}

/// Loss maskout: partitions the tasks into masked (`J > ε`) and valid sets.
pub fn maskout(losses: &[f64], epsilon: f64) -> Result<LossReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Contract(format!("maskout threshold must be positive, got {epsilon}")));
    }
    let mut masked = Vec::new();
    let mut valid = Vec::new();
    let mut total = 0.0;
    for (t, &j) in losses.iter().enumerate() {
        if exceeds(j, epsilon) {
            masked.push(t);
        } else {
            valid.push(t);
            total += j;
        }
    }
    Ok(LossReport {
        losses: losses.to_vec(),
        masked,
        valid,
        total,
    })
}

/// Uniform draw from the unit `(m-1)`-simplex via sorted-uniform spacings.
pub fn sample_simplex<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.random::<f64>()).collect();
            cuts.sort_by(f64::total_cmp);
            let mut beta = Vec::with_capacity(m);
            let mut prev = 0.0;
            for c in cuts {
                beta.push(c - prev);
                prev = c;
            }
            beta.push(1.0 - prev);
            beta
        }
    }
}

/// Same distribution as [`sample_simplex`], from normalised unit exponentials.
pub fn sample_simplex_exponential<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|d| d / total).collect()
}

/// `Σ_j β_j w_j`, accumulated in the order given.
pub fn convex_combination(beta: &[f64], vectors: &[&[f64]]) -> Vec<f64> {
    let mut out: Vec<f64> = vectors[0].iter().map(|x| beta[0] * x).collect();
    for (b, v) in beta.iter().zip(vectors).skip(1) {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += b * x;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetEvent {
    pub update: u64,
    pub env_step: u64,
    pub task: usize,
    /// Valid tasks whose vectors were mixed, in order.
    pub valid: Vec<usize>,
    pub beta: Vec<f64>,
    pub new_w: Vec<f64>,
}

/// Draws the replacement vector for task `eta` from the valid tasks' vectors.
///
/// Returns `None` when `valid` is empty; the caller skips the reset.
pub fn w_reset<R: Rng + ?Sized>(
    w: &[Vec<f64>],
    valid: &[usize],
    eta: usize,
    rng: &mut R,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    if valid.contains(&eta) {
        return Err(Error::Contract(format!("task {eta} is valid and cannot be reset")));
    }
    if valid.is_empty() {
        log::warn!("w-reset for task {eta} skipped: every task exceeded the loss threshold");
        return Ok(None);
    }
    let beta = sample_simplex(valid.len(), rng);
    let vectors: Vec<&[f64]> = valid.iter().map(|&j| w[j].as_slice()).collect();
    Ok(Some((beta.clone(), convex_combination(&beta, &vectors))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_example() {
        let r = maskout(&[1.0, 2.0, 5000.0], 3000.0).unwrap();
        assert_eq!(r.masked, vec![2]);
        assert_eq!(r.valid, vec![0, 1]);
        assert_eq!(r.total, 3.0);
    }

    #[test]
    fn threshold_is_strict() {
        let r = maskout(&[3000.0, 1.0], 3000.0).unwrap();
        assert!(r.masked.is_empty());
        assert_eq!(r.total, 3001.0);
    }

    #[test]
    fn everything_masked() {
        let r = maskout(&[1e4, f64::NAN, f64::INFINITY], 3000.0).unwrap();
        assert_eq!(r.masked, vec![0, 1, 2]);
        assert!(r.valid.is_empty());
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn non_positive_threshold_rejected() {
        assert!(maskout(&[1.0], 0.0).is_err());
    }

    #[test]
    fn single_valid_task_copies_its_vector() {
        let w = vec![vec![0.3, -0.7], vec![9.0, 9.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (beta, new_w) = w_reset(&w, &[0], 1, &mut rng).unwrap().unwrap();
        assert_eq!(beta, vec![1.0]);
        assert_eq!(new_w, w[0]);
    }

    #[test]
    fn empty_valid_set_skips() {
        let w = vec![vec![1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(w_reset(&w, &[], 0, &mut rng).unwrap().is_none());
        assert!(w_reset(&w, &[0], 0, &mut rng).is_err());
    }

    #[test]
    fn exponential_sampler_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in 1..6 {
            let b = sample_simplex_exponential(m, &mut rng);
            assert!(b.iter().all(|&x| x >= 0.0));
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
