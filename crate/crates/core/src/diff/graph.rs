use super::tensor::{gemm, gemm_a_bt_acc, gemm_at_b_acc, log1m_tanh_sq, softplus, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Exp(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    Min(Var, Var),
    Clamp(Var, f64, f64),
    ConcatCols(Var, Var),
    SliceCols(Var, usize, usize),
    WeightedSum(Var, Vec<Var>),
    Log1mTanhSq(Var),
    GaussianLogDensity(Var, Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of recorded operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape index is already a
/// topological order. One graph per training step; call [`Graph::clear`]
/// between steps.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// d(loss)/d(var); all zeros when `var` does not reach the loss.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        match self.grads[var.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

fn accumulate(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        Some(g) => g
            .data_mut()
            .iter_mut()
            .zip(delta.data())
            .for_each(|(a, b)| *a += b),
        None => *slot = Some(delta),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, k) = va.dims2()?;
        let (k2, n) = vb.dims2()?;
        if k != k2 {
            return Err(Error::dim("matmul", va.shape(), vb.shape()));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, va.data(), vb.data(), &mut out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Elementwise minimum; ties route the adjoint to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("min", self.value(a), self.value(b))?;
        let out = zip(self.value(a), self.value(b), |x, y| if y < x { y } else { x });
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Min(a, b), rg))
    }

    /// `x[b×n] + bias[n]`, the only broadcast the graph supports.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (vx, vb) = (self.value(x), self.value(bias));
        let (rows, cols) = vx.dims2()?;
        if vb.len() != cols || vb.shape().len() != 1 {
            return Err(Error::dim("add_bias", vx.shape(), vb.shape()));
        }
        let mut out = vx.data().to_vec();
        for r in 0..rows {
            for (o, b) in out[r * cols..(r + 1) * cols].iter_mut().zip(vb.data()) {
                *o += b;
            }
        }
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(
            Tensor::matrix(rows, cols, out)?,
            Op::AddBias(x, bias),
            rg,
        ))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(out, Op::AddScalar(a), rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(a).map(f);
        let rg = self.rg(a);
        self.push(out, op, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Clamp with zero adjoint outside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// `log(1 - tanh(u)^2)`, the tanh-squashing volume correction.
    pub fn log1m_tanh_sq(&mut self, u: Var) -> Var {
        self.unary(u, log1m_tanh_sq, Op::Log1mTanhSq(u))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Row sums: `[b×n] -> [b×1]`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        let (rows, cols) = v.dims2()?;
        let out = (0..rows)
            .map(|r| v.data()[r * cols..(r + 1) * cols].iter().sum())
            .collect();
        let rg = self.rg(a);
        Ok(self.push(Tensor::matrix(rows, 1, out)?, Op::SumCols(a), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (ra, ca) = va.dims2()?;
        let (rb, cb) = vb.dims2()?;
        if ra != rb {
            return Err(Error::dim("concat_cols", va.shape(), vb.shape()));
        }
        let mut out = Vec::with_capacity(ra * (ca + cb));
        for r in 0..ra {
            out.extend_from_slice(&va.data()[r * ca..(r + 1) * ca]);
            out.extend_from_slice(&vb.data()[r * cb..(r + 1) * cb]);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor::matrix(ra, ca + cb, out)?,
            Op::ConcatCols(a, b),
            rg,
        ))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a);
        let (rows, cols) = v.dims2()?;
        if start > end || end > cols {
            return Err(Error::dim("slice_cols", v.shape(), &[start, end]));
        }
        let width = end - start;
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            out.extend_from_slice(&v.data()[r * cols + start..r * cols + end]);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::matrix(rows, width, out)?,
            Op::SliceCols(a, start, end),
            rg,
        ))
    }

    /// `Σ_i weights[i] · items[i]` with `weights` a length-K vector node.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let w = self.value(weights);
        if w.len() != items.len() || items.is_empty() {
            return Err(Error::dim("weighted_sum", w.shape(), &[items.len()]));
        }
        let shape = self.value(items[0]).shape().to_vec();
        for &it in items {
            if self.value(it).shape() != shape.as_slice() {
                return Err(Error::dim("weighted_sum", &shape, self.value(it).shape()));
            }
        }
        let wd = w.data().to_vec();
        let mut out: Vec<f64> = self.value(items[0]).data().iter().map(|x| wd[0] * x).collect();
        for (wi, &it) in wd.iter().zip(items).skip(1) {
            for (o, x) in out.iter_mut().zip(self.value(it).data()) {
                *o += wi * x;
            }
        }
        let rg = self.rg(weights) || items.iter().any(|&i| self.rg(i));
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::WeightedSum(weights, items.to_vec()),
            rg,
        ))
    }

    /// Per-row log-density of a diagonal Gaussian: `[b×d]` inputs, `[b×1]` output.
    pub fn gaussian_log_density(&mut self, x: Var, mean: Var, log_std: Var) -> Result<Var> {
        let (vx, vm, vs) = (self.value(x), self.value(mean), self.value(log_std));
        same_shape("gaussian_log_density", vx, vm)?;
        same_shape("gaussian_log_density", vx, vs)?;
        let (rows, cols) = vx.dims2()?;
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let mut out = vec![0.0; rows];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for c in 0..cols {
                let i = r * cols + c;
                let z = (vx.data()[i] - vm.data()[i]) * (-vs.data()[i]).exp();
                acc += -0.5 * z * z - vs.data()[i] - half_ln_2pi;
            }
            *o = acc;
        }
        let rg = self.rg(x) || self.rg(mean) || self.rg(log_std);
        Ok(self.push(
            Tensor::matrix(rows, 1, out)?,
            Op::GaussianLogDensity(x, mean, log_std),
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.0] = Some(Tensor::new(lv.shape().to_vec(), vec![1.0])?);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn send(&self, grads: &mut [Option<Tensor>], to: Var, delta: Tensor) {
        if self.rg(to) {
            accumulate(&mut grads[to.0], delta);
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let out = &self.nodes[idx].value;
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = va.dims2()?;
                let (_, n) = vb.dims2()?;
                if self.rg(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm_a_bt_acc(m, n, k, g.data(), vb.data(), &mut ga);
                    self.send(grads, *a, Tensor::matrix(m, k, ga)?);
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; k * n];
                    gemm_at_b_acc(k, m, n, va.data(), g.data(), &mut gb);
                    self.send(grads, *b, Tensor::matrix(k, n, gb)?);
                }
            }
            Op::Add(a, b) => {
                self.send(grads, *a, g.clone());
                self.send(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.send(grads, *a, g.clone());
                self.send(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let ga = zip(g, self.value(*b), |x, y| x * y);
                let gb = zip(g, self.value(*a), |x, y| x * y);
                self.send(grads, *a, ga);
                self.send(grads, *b, gb);
            }
            Op::Min(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let pick_b: Vec<bool> = va.data().iter().zip(vb.data()).map(|(x, y)| y < x).collect();
                let ga = g
                    .data()
                    .iter()
                    .zip(&pick_b)
                    .map(|(&d, &pb)| if pb { 0.0 } else { d })
                    .collect();
                let gb = g
                    .data()
                    .iter()
                    .zip(&pick_b)
                    .map(|(&d, &pb)| if pb { d } else { 0.0 })
                    .collect();
                self.send(grads, *a, Tensor::new(g.shape().to_vec(), ga)?);
                self.send(grads, *b, Tensor::new(g.shape().to_vec(), gb)?);
            }
            Op::AddBias(x, bias) => {
                self.send(grads, *x, g.clone());
                if self.rg(*bias) {
                    let (rows, cols) = g.dims2()?;
                    let mut gb = vec![0.0; cols];
                    for r in 0..rows {
                        for (acc, v) in gb.iter_mut().zip(&g.data()[r * cols..(r + 1) * cols]) {
                            *acc += v;
                        }
                    }
                    self.send(grads, *bias, Tensor::vector(gb));
                }
            }
            Op::Scale(a, c) => self.send(grads, *a, g.map(|x| c * x)),
            Op::AddScalar(a) => self.send(grads, *a, g.clone()),
            Op::Tanh(a) => self.send(grads, *a, zip(g, out, |d, t| d * (1.0 - t * t))),
            Op::Relu(a) => {
                let ga = zip(g, self.value(*a), |d, x| if x > 0.0 { d } else { 0.0 });
                self.send(grads, *a, ga)
            }
            Op::Softplus(a) => {
                let ga = zip(g, self.value(*a), |d, x| d / (1.0 + (-x).exp()));
                self.send(grads, *a, ga)
            }
            Op::Exp(a) => self.send(grads, *a, zip(g, out, |d, e| d * e)),
            Op::Square(a) => {
                let ga = zip(g, self.value(*a), |d, x| 2.0 * d * x);
                self.send(grads, *a, ga)
            }
            Op::Clamp(a, lo, hi) => {
                let ga = zip(g, self.value(*a), |d, x| {
                    if x >= *lo && x <= *hi {
                        d
                    } else {
                        0.0
                    }
                });
                self.send(grads, *a, ga)
            }
            Op::Log1mTanhSq(a) => {
                let ga = zip(g, self.value(*a), |d, u| -2.0 * d * u.tanh());
                self.send(grads, *a, ga)
            }
            Op::Sum(a) => {
                let s = g.item();
                self.send(grads, *a, Tensor::filled(self.value(*a).shape(), s));
            }
            Op::Mean(a) => {
                let v = self.value(*a);
                let s = g.item() / v.len() as f64;
                self.send(grads, *a, Tensor::filled(v.shape(), s));
            }
            Op::SumCols(a) => {
                let (rows, cols) = self.value(*a).dims2()?;
                let mut ga = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    ga.extend(std::iter::repeat(g.data()[r]).take(cols));
                }
                self.send(grads, *a, Tensor::matrix(rows, cols, ga)?);
            }
            Op::ConcatCols(a, b) => {
                let (rows, ca) = self.value(*a).dims2()?;
                let (_, cb) = self.value(*b).dims2()?;
                let w = ca + cb;
                let mut ga = Vec::with_capacity(rows * ca);
                let mut gb = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    ga.extend_from_slice(&g.data()[r * w..r * w + ca]);
                    gb.extend_from_slice(&g.data()[r * w + ca..(r + 1) * w]);
                }
                self.send(grads, *a, Tensor::matrix(rows, ca, ga)?);
                self.send(grads, *b, Tensor::matrix(rows, cb, gb)?);
            }
            Op::SliceCols(a, start, end) => {
                let (rows, cols) = self.value(*a).dims2()?;
                let width = end - start;
                let mut ga = vec![0.0; rows * cols];
                for r in 0..rows {
                    ga[r * cols + start..r * cols + end]
                        .copy_from_slice(&g.data()[r * width..(r + 1) * width]);
                }
                self.send(grads, *a, Tensor::matrix(rows, cols, ga)?);
            }
            Op::WeightedSum(weights, items) => {
                let wd = self.value(*weights).data();
                if self.rg(*weights) {
                    let gw: Vec<f64> = items
                        .iter()
                        .map(|&it| {
                            self.value(it)
                                .data()
                                .iter()
                                .zip(g.data())
                                .map(|(x, d)| x * d)
                                .sum()
                        })
                        .collect();
                    let shape = self.value(*weights).shape().to_vec();
                    self.send(grads, *weights, Tensor::new(shape, gw)?);
                }
                for (&wi, &it) in wd.iter().zip(items) {
                    if self.rg(it) {
                        self.send(grads, it, g.map(|d| wi * d));
                    }
                }
            }
            Op::GaussianLogDensity(x, mean, log_std) => {
                let (vx, vm, vs) = (self.value(*x), self.value(*mean), self.value(*log_std));
                let (rows, cols) = vx.dims2()?;
                let mut gx = vec![0.0; rows * cols];
                let mut gm = vec![0.0; rows * cols];
                let mut gs = vec![0.0; rows * cols];
                for r in 0..rows {
                    let d = g.data()[r];
                    for c in 0..cols {
                        let i = r * cols + c;
                        let inv_std = (-vs.data()[i]).exp();
                        let z = (vx.data()[i] - vm.data()[i]) * inv_std;
                        gx[i] = -d * z * inv_std;
                        gm[i] = d * z * inv_std;
                        gs[i] = d * (z * z - 1.0);
                    }
                }
                self.send(grads, *x, Tensor::matrix(rows, cols, gx)?);
                self.send(grads, *mean, Tensor::matrix(rows, cols, gm)?);
                self.send(grads, *log_std, Tensor::matrix(rows, cols, gs)?);
            }
        }
        Ok(())
    }
}
