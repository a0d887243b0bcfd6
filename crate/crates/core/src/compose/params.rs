use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K` parameter vectors of dimension `n`, stored column after column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    n: usize,
    k: usize,
    data: Vec<f64>,
    frozen: bool,
}

impl ParameterSet {
    pub fn zeros(n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("parameter set needs K >= 1".into()));
        }
        Ok(ParameterSet {
            n,
            k,
            data: vec![0.0; n * k],
            frozen: false,
        })
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let k = columns.len();
        if k == 0 {
            return Err(Error::Config("parameter set needs K >= 1".into()));
        }
        let n = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::dim("parameter set columns", &[n], &[bad.len()]));
        }
        Ok(ParameterSet {
            n,
            k,
            data: columns.concat(),
            frozen: false,
        })
    }

    pub fn from_flat(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || data.len() != n * k {
            return Err(Error::dim("parameter set", &[n, k], &[data.len()]));
        }
        Ok(ParameterSet {
            n,
            k,
            data,
            frozen: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// Column-major backing storage.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Marks the set non-trainable (transfer mode).
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Rows `range` of every column, as a new parameter set.
    pub fn rows(&self, range: std::ops::Range<usize>) -> ParameterSet {
        let cols = (0..self.k).map(|i| self.column(i)[range.clone()].to_vec()).collect();
        ParameterSet::from_columns(cols).expect("non-empty K")
    }
}

/// One task's flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskParams {
    pub theta: Vec<f64>,
}

/// `Σ_i w_i φ_i`. The first term seeds the accumulator so that a single
/// unit weight reproduces its column bit for bit.
pub fn compose(phi: &ParameterSet, w: &[f64]) -> Result<TaskParams> {
    if w.len() != phi.k {
        return Err(Error::dim("compose", &[phi.k], &[w.len()]));
    }
    Ok(TaskParams {
        theta: compose_slice(phi, w, 0..phi.n),
    })
}

/// Composition restricted to rows `range`.
pub fn compose_slice(phi: &ParameterSet, w: &[f64], range: std::ops::Range<usize>) -> Vec<f64> {
    let mut theta: Vec<f64> = phi.column(0)[range.clone()].iter().map(|&x| w[0] * x).collect();
    for (i, &wi) in w.iter().enumerate().skip(1) {
        for (t, &x) in theta.iter_mut().zip(&phi.column(i)[range.clone()]) {
            *t += wi * x;
        }
    }
    theta
}

pub fn normalized(w: &[f64]) -> Vec<f64> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return w.to_vec();
    }
    w.iter().map(|x| x / norm).collect()
}

/// Chain rule from `∂L/∂θ` back to the raw compositional vector.
///
/// `theta_grad` covers rows `range` of `phi`. With `normalize`, composition
/// used `w/‖w‖` and the result is projected onto the tangent space.
pub fn w_gradient(
    phi: &ParameterSet,
    w: &[f64],
    normalize: bool,
    theta_grad: &[f64],
    range: std::ops::Range<usize>,
) -> Vec<f64> {
    let g_eff: Vec<f64> = (0..phi.k)
        .map(|i| {
            phi.column(i)[range.clone()]
                .iter()
                .zip(theta_grad)
                .map(|(p, g)| p * g)
                .sum()
        })
        .collect();
    if !normalize {
        return g_eff;
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return g_eff;
    }
    let unit: Vec<f64> = w.iter().map(|x| x / norm).collect();
    let radial: f64 = unit.iter().zip(&g_eff).map(|(u, g)| u * g).sum();
    g_eff
        .iter()
        .zip(&unit)
        .map(|(g, u)| (g - u * radial) / norm)
        .collect()
}

/// Per-task compositional vectors `W = [w_1 … w_T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionalMatrix {
    k: usize,
    vectors: Vec<Vec<f64>>,
    normalize: bool,
}

impl CompositionalMatrix {
    pub fn new(k: usize, vectors: Vec<Vec<f64>>, normalize: bool) -> Result<Self> {
        if let Some(bad) = vectors.iter().find(|v| v.len() != k) {
            return Err(Error::dim("compositional vector", &[k], &[bad.len()]));
        }
        let mut m = CompositionalMatrix {
            k,
            vectors,
            normalize,
        };
        if normalize {
            for t in 0..m.vectors.len() {
                m.project(t);
            }
        }
        Ok(m)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tasks(&self) -> usize {
        self.vectors.len()
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn raw(&self, task: usize) -> &[f64] {
        &self.vectors[task]
    }

    pub fn raw_mut(&mut self, task: usize) -> &mut [f64] {
        &mut self.vectors[task]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// The vector actually used in composition.
    pub fn effective(&self, task: usize) -> Vec<f64> {
        if self.normalize {
            normalized(&self.vectors[task])
        } else {
            self.vectors[task].clone()
        }
    }

    pub fn set(&mut self, task: usize, w: Vec<f64>) -> Result<()> {
        if w.len() != self.k {
            return Err(Error::dim("compositional vector", &[self.k], &[w.len()]));
        }
        self.vectors[task] = w;
        if self.normalize {
            self.project(task);
        }
        Ok(())
    }

    pub fn push(&mut self, w: Vec<f64>) -> Result<usize> {
        self.vectors.push(vec![0.0; self.k]);
        let t = self.vectors.len() - 1;
        self.set(t, w)?;
        Ok(t)
    }

    /// Retracts `w_τ` back onto the unit sphere when normalization is on.
    pub fn project(&mut self, task: usize) {
        if self.normalize {
            let norm = self.vectors[task].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                self.vectors[task].iter_mut().for_each(|x| *x /= norm);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> ParameterSet {
        ParameterSet::from_columns(vec![vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap()
    }

    #[test]
    fn one_hot_selects_column() {
        let phi = two_by_two();
        assert_eq!(compose(&phi, &[1.0, 0.0]).unwrap().theta, vec![1.0, 3.0]);
        assert_eq!(compose(&phi, &[0.0, 1.0]).unwrap().theta, vec![2.0, 4.0]);
    }

    #[test]
    fn average_of_columns() {
        let phi = two_by_two();
        assert_eq!(compose(&phi, &[0.5, 0.5]).unwrap().theta, vec![1.5, 3.5]);
    }

    #[test]
    fn wrong_length_is_dimension_error() {
        let phi = two_by_two();
        assert!(matches!(
            compose(&phi, &[1.0, 0.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn ragged_columns_rejected() {
        assert!(ParameterSet::from_columns(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(ParameterSet::from_columns(vec![]).is_err());
    }

    #[test]
    fn normalize_projects_to_unit_norm() {
        let m = CompositionalMatrix::new(2, vec![vec![3.0, 4.0], vec![-1.0, 1.0]], true).unwrap();
        for t in 0..2 {
            let norm: f64 = m.effective(t).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert_eq!(m.raw(0), &[0.6, 0.8]);
    }

    #[test]
    fn freeze_toggles() {
        let mut phi = two_by_two();
        assert!(!phi.is_frozen());
        phi.freeze();
        assert!(phi.is_frozen());
        phi.unfreeze();
        assert!(!phi.is_frozen());
    }
}
