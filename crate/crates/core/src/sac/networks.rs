use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::compose::{CompositionScope, LayerShape, MlpLayout};
use crate::diff::{gemm, Graph, Tensor, Var};
use crate::error::Result;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    fn record(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Net {
    Actor,
    Critic1,
    Critic2,
}

impl Net {
    pub const ALL: [Net; 3] = [Net::Actor, Net::Critic1, Net::Critic2];

    fn index(self) -> usize {
        match self {
            Net::Actor => 0,
            Net::Critic1 => 1,
            Net::Critic2 => 2,
        }
    }
}

/// Where one layer's `[weight, bias]` block lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    /// `true`: rows of `Φ` (composed per task); `false`: the plain shared vector.
    pub composed: bool,
    pub offset: usize,
    pub shape: LayerShape,
}

impl Slot {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.shape.param_count()
    }
}

/// Parameter placement for the actor and twin critics.
///
/// Rows of `Φ` and entries of the shared vector are ordered actor, critic 1,
/// critic 2, so each network group occupies one contiguous range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentLayout {
    pub actor: MlpLayout,
    pub critic: MlpLayout,
    pub scope: CompositionScope,
    slots: [Vec<Slot>; 3],
    pub phi_len: usize,
    pub shared_len: usize,
    pub phi_actor: std::ops::Range<usize>,
    pub phi_critic: std::ops::Range<usize>,
    pub shared_actor: std::ops::Range<usize>,
    pub shared_critic: std::ops::Range<usize>,
}

impl AgentLayout {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], scope: CompositionScope) -> Self {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(2 * act_dim);
        let mut critic_sizes = vec![obs_dim + act_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let actor = MlpLayout::from_sizes(&actor_sizes);
        let critic = MlpLayout::from_sizes(&critic_sizes);

        let mut phi_len = 0;
        let mut shared_len = 0;
        let mut slots: [Vec<Slot>; 3] = Default::default();
        let mut phi_bounds = [0usize; 4];
        let mut shared_bounds = [0usize; 4];
        for net in Net::ALL {
            let layout = if net == Net::Actor { &actor } else { &critic };
            let n_layers = layout.layers.len();
            for (i, &shape) in layout.layers.iter().enumerate() {
                let composed = scope.is_compositional(net == Net::Actor, i, n_layers);
                let cursor = if composed { &mut phi_len } else { &mut shared_len };
                slots[net.index()].push(Slot {
                    composed,
                    offset: *cursor,
                    shape,
                });
                *cursor += shape.param_count();
            }
            phi_bounds[net.index() + 1] = phi_len;
            shared_bounds[net.index() + 1] = shared_len;
        }

        AgentLayout {
            actor,
            critic,
            scope,
            slots,
            phi_len,
            shared_len,
            phi_actor: 0..phi_bounds[1],
            phi_critic: phi_bounds[1]..phi_len,
            shared_actor: 0..shared_bounds[1],
            shared_critic: shared_bounds[1]..shared_len,
        }
    }

    pub fn slots(&self, net: Net) -> &[Slot] {
        &self.slots[net.index()]
    }

    /// Shapes of the `Φ` rows, in storage order.
    pub fn phi_template(&self) -> Vec<LayerShape> {
        self.template(true)
    }

    pub fn shared_template(&self) -> Vec<LayerShape> {
        self.template(false)
    }

    fn template(&self, composed: bool) -> Vec<LayerShape> {
        Net::ALL
            .iter()
            .flat_map(|&n| self.slots(n).iter())
            .filter(|s| s.composed == composed)
            .map(|s| s.shape)
            .collect()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim() / 2
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }
}

/// Borrowed `[weight, bias]` blocks of one network.
#[derive(Clone, Debug)]
pub struct NetParams<'a> {
    pub layers: Vec<(&'a [f64], LayerShape)>,
}

impl<'a> NetParams<'a> {
    pub fn gather(slots: &[Slot], composed: &'a [f64], shared: &'a [f64]) -> Self {
        NetParams {
            layers: slots
                .iter()
                .map(|s| {
                    let src = if s.composed { composed } else { shared };
                    (&src[s.range()], s.shape)
                })
                .collect(),
        }
    }
}

/// Eager MLP forward without recording.
pub fn mlp_forward(params: &NetParams<'_>, x: &Tensor, act: Activation) -> Result<Tensor> {
    let (rows, _) = x.dims2()?;
    let mut h = x.data().to_vec();
    let n_layers = params.layers.len();
    for (i, (block, shape)) in params.layers.iter().enumerate() {
        let split = shape.d_in * shape.d_out;
        let mut out = vec![0.0; rows * shape.d_out];
        gemm(rows, shape.d_in, shape.d_out, &h, &block[..split], &mut out);
        let bias = &block[split..];
        for r in 0..rows {
            for (o, b) in out[r * shape.d_out..(r + 1) * shape.d_out].iter_mut().zip(bias) {
                *o += b;
            }
        }
        if i + 1 < n_layers {
            out.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        h = out;
    }
    let d_out = params.layers.last().map_or(0, |l| l.1.d_out);
    Tensor::matrix(rows, d_out, h)
}

/// Graph handles of one recorded network.
pub struct NetVars {
    /// `(weight, bias)` per layer.
    pub layers: Vec<(Var, Var)>,
}

impl NetVars {
    /// Registers each block as a leaf; `trainable` selects param vs constant.
    pub fn register(g: &mut Graph, params: &NetParams<'_>, trainable: bool) -> Result<Self> {
        let mut layers = Vec::with_capacity(params.layers.len());
        for (block, shape) in &params.layers {
            let split = shape.d_in * shape.d_out;
            let w = Tensor::matrix(shape.d_in, shape.d_out, block[..split].to_vec())?;
            let b = Tensor::vector(block[split..].to_vec());
            let (wv, bv) = if trainable {
                (g.param(w), g.param(b))
            } else {
                (g.constant(w), g.constant(b))
            };
            layers.push((wv, bv));
        }
        Ok(NetVars { layers })
    }

    pub fn forward(&self, g: &mut Graph, x: Var, act: Activation) -> Result<Var> {
        let mut h = x;
        let n = self.layers.len();
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            h = g.matmul(h, w)?;
            h = g.add_bias(h, b)?;
            if i + 1 < n {
                h = act.record(g, h);
            }
        }
        Ok(h)
    }
}

/// Splits raw actor output `[b × 2A]` into mean and clamped log-std.
pub fn split_actor_output(out: &Tensor, act_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let rows = out.len() / (2 * act_dim);
    let mut mean = Vec::with_capacity(rows * act_dim);
    let mut log_std = Vec::with_capacity(rows * act_dim);
    for r in 0..rows {
        let row = out.row(r);
        mean.extend_from_slice(&row[..act_dim]);
        log_std.extend(row[act_dim..].iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)));
    }
    (mean, log_std)
}

/// Squashed-Gaussian sample from `mean`/`log_std` with standard-normal
/// `noise`; returns `(action, log_prob per row)`.
pub fn squashed_sample(mean: &[f64], log_std: &[f64], noise: &[f64], act_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let rows = mean.len() / act_dim;
    let mut action = Vec::with_capacity(mean.len());
    let mut log_prob = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut lp = 0.0;
        for c in 0..act_dim {
            let i = r * act_dim + c;
            let u = mean[i] + log_std[i].exp() * noise[i];
            action.push(u.tanh());
            lp += -0.5 * noise[i] * noise[i] - log_std[i] - half_ln_2pi - crate::diff::log1m_tanh_sq(u);
        }
        log_prob.push(lp);
    }
    (action, log_prob)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}
