use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::networks::{
    mlp_forward, split_actor_output, squashed_sample, standard_normal, Activation, AgentLayout, Net,
    NetParams, NetVars, Slot, LOG_STD_MAX, LOG_STD_MIN,
};
use super::replay::TaskBatch;
use crate::compose::{
    compose, init_identical, init_plain, init_w, w_gradient, CompositionScope, CompositionalMatrix,
    ParameterSet, WInit,
};
use crate::diff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::optim::Adam;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub tasks: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub k: usize,
    pub scope: CompositionScope,
    pub normalize_w: bool,
    pub w_init: WInit,
    pub gamma: f64,
    pub polyak: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub w_lr: f64,
    pub alpha_lr: f64,
    pub init_log_alpha: f64,
    /// Defaults to `-act_dim`.
    pub target_entropy: Option<f64>,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            obs_dim: 0,
            act_dim: 0,
            tasks: 1,
            hidden: vec![400, 400, 400],
            activation: Activation::Relu,
            k: 5,
            scope: CompositionScope::AcShared,
            normalize_w: false,
            w_init: WInit::Random,
            gamma: 0.99,
            polyak: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            w_lr: 3e-4,
            alpha_lr: 3e-4,
            init_log_alpha: 0.0,
            target_entropy: None,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn target_entropy(&self) -> f64 {
        self.target_entropy.unwrap_or(-(self.act_dim as f64))
    }
}

/// Standard-normal draws used by the reparameterised policy samples.
#[derive(Clone, Debug)]
pub struct PolicyNoise {
    /// `[b × A]` for actions at the current state.
    pub current: Vec<f64>,
    /// `[b × A]` for actions at the next state (critic target).
    pub next: Vec<f64>,
}

impl PolicyNoise {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, rows: usize, act_dim: usize) -> Self {
        PolicyNoise {
            current: standard_normal(rng, rows * act_dim),
            next: standard_normal(rng, rows * act_dim),
        }
    }
}

/// `J_τ` and its gradients for one task's sub-batch.
#[derive(Clone, Debug)]
pub struct TaskLoss {
    pub task: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub total: f64,
    /// `-mean log π(a|s)` on the sub-batch.
    pub entropy: f64,
    /// `∂J_τ/∂θ_τ` over the rows of `Φ`.
    pub theta_grad: Vec<f64>,
    /// `∂J_τ/∂` plain shared parameters.
    pub shared_grad: Vec<f64>,
    /// `∂J_τ/∂w_τ` (raw vector, through the normalisation when enabled).
    pub w_grad: Vec<f64>,
    /// Effective `w_τ` used for the composition.
    pub w_effective: Vec<f64>,
}

impl TaskLoss {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.theta_grad.iter().all(|v| v.is_finite())
            && self.shared_grad.iter().all(|v| v.is_finite())
            && self.w_grad.iter().all(|v| v.is_finite())
    }

    /// `∂J_τ/∂Φ` in column-major `n × K` order: `w_{τ,i} · ∂J_τ/∂θ_τ`.
    pub fn phi_grad(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.theta_grad.len() * self.w_effective.len()];
        self.accumulate_phi_grad(&mut out);
        out
    }

    pub fn accumulate_phi_grad(&self, out: &mut [f64]) {
        let n = self.theta_grad.len();
        for (i, wi) in self.w_effective.iter().enumerate() {
            for (o, g) in out[i * n..(i + 1) * n].iter_mut().zip(&self.theta_grad) {
                *o += wi * g;
            }
        }
    }

    /// Multiplies the loss and every gradient by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.actor_loss *= factor;
        self.critic_loss *= factor;
        self.total *= factor;
        for v in self
            .theta_grad
            .iter_mut()
            .chain(self.shared_grad.iter_mut())
            .chain(self.w_grad.iter_mut())
        {
            *v *= factor;
        }
    }

    /// Rescales the loss so that `J = target`, gradients alongside.
    pub fn spike(&mut self, target: f64) {
        if self.total.is_finite() && self.total != 0.0 {
            self.scale(target / self.total);
        }
        self.total = target;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Optimizers {
    pub phi_actor: Adam,
    pub phi_critic: Adam,
    pub shared_actor: Adam,
    pub shared_critic: Adam,
    pub w: Vec<Adam>,
    pub alpha: Vec<Adam>,
}

/// Soft actor-critic agent whose networks are composed from `Φ` and `W`.
#[derive(Clone, Debug)]
pub struct SacAgent {
    pub(crate) config: AgentConfig,
    pub(crate) layout: AgentLayout,
    pub(crate) phi: ParameterSet,
    pub(crate) shared: Vec<f64>,
    pub(crate) target_phi: ParameterSet,
    pub(crate) target_shared: Vec<f64>,
    pub(crate) w: CompositionalMatrix,
    /// Polyak-averaged `W`, composed with the target `Φ` for bootstrapping.
    pub(crate) target_w: CompositionalMatrix,
    pub(crate) log_alpha: Vec<f64>,
    pub(crate) opt: Optimizers,
}

fn segments(n: usize, k: usize, rows: &std::ops::Range<usize>) -> Vec<std::ops::Range<usize>> {
    (0..k).map(|i| i * n + rows.start..i * n + rows.end).collect()
}

fn adam_segments(opt: &mut Adam, data: &mut [f64], grad: &[f64], segs: &[std::ops::Range<usize>]) {
    if opt.is_empty() {
        return;
    }
    let mut p: Vec<f64> = Vec::with_capacity(opt.len());
    let mut g: Vec<f64> = Vec::with_capacity(opt.len());
    for s in segs {
        p.extend_from_slice(&data[s.clone()]);
        g.extend_from_slice(&grad[s.clone()]);
    }
    opt.step(&mut p, &g);
    let mut cursor = 0;
    for s in segs {
        let len = s.len();
        data[s.clone()].copy_from_slice(&p[cursor..cursor + len]);
        cursor += len;
    }
}

/// `target ← ρ·online + (1 − ρ)·target`, elementwise.
pub fn polyak_update(online: &[f64], target: &mut [f64], rho: f64) {
    if rho == 1.0 {
        target.copy_from_slice(online);
        return;
    }
    if rho == 0.0 {
        return;
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = rho * o + (1.0 - rho) * *t;
    }
}

impl SacAgent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if config.obs_dim == 0 || config.act_dim == 0 {
            return Err(Error::Config("observation and action dimensions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&config.polyak) {
            return Err(Error::Config(format!("polyak rate {} outside [0, 1]", config.polyak)));
        }
        let layout = AgentLayout::new(config.obs_dim, config.act_dim, &config.hidden, config.scope);
        let phi = init_identical(&layout.phi_template(), config.k, config.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0001);
        let shared = init_plain(&layout.shared_template(), &mut rng);
        let w = init_w(
            config.tasks,
            config.k,
            config.w_init,
            config.seed ^ 0x5eed_0002,
            config.normalize_w,
        )?;
        Self::from_parts(config, phi, shared, w)
    }

    /// Builds an agent around explicit `Φ`, shared parameters and `W`.
    pub fn from_parts(config: AgentConfig, phi: ParameterSet, shared: Vec<f64>, w: CompositionalMatrix) -> Result<Self> {
        let layout = AgentLayout::new(config.obs_dim, config.act_dim, &config.hidden, config.scope);
        if phi.n() != layout.phi_len || phi.k() != config.k {
            return Err(Error::dim("agent parameter set", &[layout.phi_len, config.k], &[phi.n(), phi.k()]));
        }
        if shared.len() != layout.shared_len {
            return Err(Error::dim("agent shared parameters", &[layout.shared_len], &[shared.len()]));
        }
        if w.k() != config.k || w.tasks() != config.tasks {
            return Err(Error::dim("agent compositional matrix", &[config.k, config.tasks], &[w.k(), w.tasks()]));
        }
        let k = config.k;
        let opt = Optimizers {
            phi_actor: Adam::new(k * layout.phi_actor.len(), config.actor_lr),
            phi_critic: Adam::new(k * layout.phi_critic.len(), config.critic_lr),
            shared_actor: Adam::new(layout.shared_actor.len(), config.actor_lr),
            shared_critic: Adam::new(layout.shared_critic.len(), config.critic_lr),
            w: (0..config.tasks).map(|_| Adam::new(k, config.w_lr)).collect(),
            alpha: (0..config.tasks).map(|_| Adam::new(1, config.alpha_lr)).collect(),
        };
        Ok(SacAgent {
            log_alpha: vec![config.init_log_alpha; config.tasks],
            target_phi: phi.clone(),
            target_shared: shared.clone(),
            target_w: w.clone(),
            config,
            layout,
            phi,
            shared,
            w,
            opt,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    pub fn phi(&self) -> &ParameterSet {
        &self.phi
    }

    pub fn phi_mut(&mut self) -> &mut ParameterSet {
        &mut self.phi
    }

    pub fn shared(&self) -> &[f64] {
        &self.shared
    }

    pub fn w(&self) -> &CompositionalMatrix {
        &self.w
    }

    pub fn tasks(&self) -> usize {
        self.w.tasks()
    }

    pub fn log_alpha(&self) -> &[f64] {
        &self.log_alpha
    }

    pub fn set_log_alpha(&mut self, task: usize, value: f64) -> Result<()> {
        self.check_task(task)?;
        self.log_alpha[task] = value;
        Ok(())
    }

    pub fn alpha(&self, task: usize) -> f64 {
        self.log_alpha[task].exp()
    }

    pub fn target_phi(&self) -> &ParameterSet {
        &self.target_phi
    }

    pub fn target_shared(&self) -> &[f64] {
        &self.target_shared
    }

    pub fn target_w(&self) -> &CompositionalMatrix {
        &self.target_w
    }

    pub fn is_frozen(&self) -> bool {
        self.phi.is_frozen()
    }

    /// Freezes `Φ`, the plain shared parameters and the temperatures; only
    /// `W` keeps training.
    pub fn freeze_phi(&mut self) {
        self.phi.freeze();
    }

    pub fn unfreeze_phi(&mut self) {
        self.phi.unfreeze();
    }

    pub fn check_task(&self, task: usize) -> Result<()> {
        if task >= self.tasks() {
            return Err(Error::TaskId {
                task,
                count: self.tasks(),
            });
        }
        Ok(())
    }

    /// Appends a task with compositional vector `w` and fresh optimiser state.
    pub fn add_task(&mut self, w: Vec<f64>) -> Result<usize> {
        let t = self.w.push(w.clone())?;
        self.target_w.push(w)?;
        self.log_alpha.push(self.config.init_log_alpha);
        self.opt.w.push(Adam::new(self.config.k, self.config.w_lr));
        self.opt.alpha.push(Adam::new(1, self.config.alpha_lr));
        self.config.tasks = self.w.tasks();
        Ok(t)
    }

    /// Replaces `w_τ` and restarts its optimiser moments.
    pub fn reset_w(&mut self, task: usize, w: Vec<f64>) -> Result<()> {
        self.check_task(task)?;
        self.w.set(task, w.clone())?;
        self.target_w.set(task, w)?;
        self.opt.w[task].reset();
        Ok(())
    }

    /// Multiplies the stored `w_τ` by `factor`, bypassing projection.
    pub fn scale_w(&mut self, task: usize, factor: f64) -> Result<()> {
        self.check_task(task)?;
        for v in self.w.raw_mut(task) {
            *v *= factor;
        }
        Ok(())
    }

    pub fn composed_theta(&self, task: usize) -> Result<Vec<f64>> {
        self.check_task(task)?;
        Ok(compose(&self.phi, &self.w.effective(task))?.theta)
    }

    /// Deterministic/stochastic actor for task `τ`.
    pub fn policy(&self, task: usize) -> Result<TaskPolicy> {
        self.check_task(task)?;
        self.policy_for_w(&self.w.effective(task))
    }

    /// Actor composed with an arbitrary (already effective) vector.
    pub fn policy_for_w(&self, w: &[f64]) -> Result<TaskPolicy> {
        let theta = compose(&self.phi, w)?.theta;
        Ok(TaskPolicy {
            composed: theta[..self.layout.phi_actor.end].to_vec(),
            shared: self.shared[..self.layout.shared_actor.end].to_vec(),
            slots: self.layout.slots(Net::Actor).to_vec(),
            act_dim: self.config.act_dim,
            activation: self.config.activation,
        })
    }

    /// Q-values of one critic for task `τ`, using online (`target = false`)
    /// or target parameters.
    pub fn critic_values(&self, task: usize, net: Net, target: bool, states: &Tensor, actions: &Tensor) -> Result<Vec<f64>> {
        self.check_task(task)?;
        let (phi, shared, w) = if target {
            (&self.target_phi, &self.target_shared, self.target_w.effective(task))
        } else {
            (&self.phi, &self.shared, self.w.effective(task))
        };
        let theta = compose(phi, &w)?.theta;
        let input = concat_rows(states, actions)?;
        let params = NetParams::gather(self.layout.slots(net), &theta, shared);
        Ok(mlp_forward(&params, &input, self.config.activation)?.into_data())
    }

    /// `J_τ = actor loss + critic loss` on `batch`, with gradients.
    ///
    /// The critic loss is `mean((Q1 - y)^2) + mean((Q2 - y)^2)` with the
    /// twin-minimum soft target `y`; the actor loss is
    /// `mean(α_τ log π(ã|s) - min(Q1, Q2)(s, ã))` with the critics held
    /// constant, so each term only moves its own network.
    pub fn task_loss(&self, batch: &TaskBatch, noise: &PolicyNoise) -> Result<TaskLoss> {
        let task = batch.task;
        self.check_task(task)?;
        let rows = batch.len();
        if rows == 0 {
            return Err(Error::Sampling(format!("empty sub-batch for task {task}")));
        }
        let act_dim = self.config.act_dim;
        if noise.current.len() != rows * act_dim || noise.next.len() != rows * act_dim {
            return Err(Error::dim("policy noise", &[rows * act_dim], &[noise.current.len(), noise.next.len()]));
        }
        let act = self.config.activation;
        let w_eff = self.w.effective(task);
        let theta = compose(&self.phi, &w_eff)?.theta;
        let target_theta = compose(&self.target_phi, &self.target_w.effective(task))?.theta;
        let alpha = self.alpha(task);
        let gamma = self.config.gamma;

        let actor_p = NetParams::gather(self.layout.slots(Net::Actor), &theta, &self.shared);
        let c1_p = NetParams::gather(self.layout.slots(Net::Critic1), &theta, &self.shared);
        let c2_p = NetParams::gather(self.layout.slots(Net::Critic2), &theta, &self.shared);

        // soft target
        let next_out = mlp_forward(&actor_p, &batch.next_states, act)?;
        let (mean2, log_std2) = split_actor_output(&next_out, act_dim);
        let (next_action, next_logp) = squashed_sample(&mean2, &log_std2, &noise.next, act_dim);
        let next_input = concat_rows(&batch.next_states, &Tensor::matrix(rows, act_dim, next_action)?)?;
        let qt1 = mlp_forward(
            &NetParams::gather(self.layout.slots(Net::Critic1), &target_theta, &self.target_shared),
            &next_input,
            act,
        )?;
        let qt2 = mlp_forward(
            &NetParams::gather(self.layout.slots(Net::Critic2), &target_theta, &self.target_shared),
            &next_input,
            act,
        )?;
        let y: Vec<f64> = (0..rows)
            .map(|i| {
                let min_q = qt1.data()[i].min(qt2.data()[i]);
                batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * (min_q - alpha * next_logp[i])
            })
            .collect();

        let mut g = Graph::new();
        let actor_v = NetVars::register(&mut g, &actor_p, true)?;
        let c1_v = NetVars::register(&mut g, &c1_p, true)?;
        let c2_v = NetVars::register(&mut g, &c2_p, true)?;
        let c1_const = NetVars::register(&mut g, &c1_p, false)?;
        let c2_const = NetVars::register(&mut g, &c2_p, false)?;

        let s = g.constant(batch.states.clone());
        let a = g.constant(batch.actions.clone());
        let sa = g.concat_cols(s, a)?;
        let y_v = g.constant(Tensor::matrix(rows, 1, y)?);
        let q1 = c1_v.forward(&mut g, sa, act)?;
        let q2 = c2_v.forward(&mut g, sa, act)?;
        let d1 = g.sub(q1, y_v)?;
        let d1 = g.square(d1);
        let l1 = g.mean(d1);
        let d2 = g.sub(q2, y_v)?;
        let d2 = g.square(d2);
        let l2 = g.mean(d2);
        let critic_loss = g.add(l1, l2)?;

        let out = actor_v.forward(&mut g, s, act)?;
        let mean = g.slice_cols(out, 0, act_dim)?;
        let log_std = g.slice_cols(out, act_dim, 2 * act_dim)?;
        let log_std = g.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX);
        let std = g.exp(log_std);
        let eps = g.constant(Tensor::matrix(rows, act_dim, noise.current.clone())?);
        let spread = g.mul(std, eps)?;
        let u = g.add(mean, spread)?;
        let action = g.tanh(u);
        let log_density = g.gaussian_log_density(u, mean, log_std)?;
        let correction = g.log1m_tanh_sq(u);
        let correction = g.sum_cols(correction)?;
        let logp = g.sub(log_density, correction)?;
        let s_pi = g.concat_cols(s, action)?;
        let q1_pi = c1_const.forward(&mut g, s_pi, act)?;
        let q2_pi = c2_const.forward(&mut g, s_pi, act)?;
        let min_q = g.min(q1_pi, q2_pi)?;
        let weighted = g.scale(logp, alpha);
        let objective = g.sub(weighted, min_q)?;
        let actor_loss = g.mean(objective);
        let entropy = -g.value(logp).data().iter().sum::<f64>() / rows as f64;

        let total = g.add(actor_loss, critic_loss)?;
        let mut grads = g.backward(total)?;

        let mut theta_grad = vec![0.0; self.layout.phi_len];
        let mut shared_grad = vec![0.0; self.layout.shared_len];
        for (net, vars) in [(Net::Actor, &actor_v), (Net::Critic1, &c1_v), (Net::Critic2, &c2_v)] {
            for (slot, &(wv, bv)) in self.layout.slots(net).iter().zip(&vars.layers) {
                let dst = if slot.composed {
                    &mut theta_grad
                } else {
                    &mut shared_grad
                };
                let split = slot.offset + slot.shape.d_in * slot.shape.d_out;
                dst[slot.offset..split].copy_from_slice(grads.take(wv).data());
                dst[split..slot.range().end].copy_from_slice(grads.take(bv).data());
            }
        }
        let w_grad = w_gradient(
            &self.phi,
            self.w.raw(task),
            self.w.normalize(),
            &theta_grad,
            0..self.layout.phi_len,
        );

        Ok(TaskLoss {
            task,
            actor_loss: g.value(actor_loss).item(),
            critic_loss: g.value(critic_loss).item(),
            total: g.value(total).item(),
            entropy,
            theta_grad,
            shared_grad,
            w_grad,
            w_effective: w_eff,
        })
    }

    /// `Σ_τ ∂J_τ/∂Φ` over the given losses, column-major `n × K`.
    pub fn phi_gradient<'a>(&self, losses: impl IntoIterator<Item = &'a TaskLoss>) -> Vec<f64> {
        let mut out = vec![0.0; self.phi.n() * self.phi.k()];
        for l in losses {
            l.accumulate_phi_grad(&mut out);
        }
        out
    }

    pub fn shared_gradient<'a>(&self, losses: impl IntoIterator<Item = &'a TaskLoss>) -> Vec<f64> {
        let mut out = vec![0.0; self.shared.len()];
        for l in losses {
            for (o, g) in out.iter_mut().zip(&l.shared_grad) {
                *o += g;
            }
        }
        out
    }

    /// One optimiser step on `Φ` and the shared parameters; no-op when frozen.
    pub fn step_task_agnostic(&mut self, phi_grad: &[f64], shared_grad: &[f64]) -> Result<()> {
        let (n, k) = (self.phi.n(), self.phi.k());
        if phi_grad.len() != n * k || shared_grad.len() != self.shared.len() {
            return Err(Error::dim("task-agnostic gradient", &[n * k, self.shared.len()], &[phi_grad.len(), shared_grad.len()]));
        }
        if self.phi.is_frozen() {
            return Ok(());
        }
        let actor_segs = segments(n, k, &self.layout.phi_actor);
        let critic_segs = segments(n, k, &self.layout.phi_critic);
        adam_segments(&mut self.opt.phi_actor, self.phi.as_flat_mut(), phi_grad, &actor_segs);
        adam_segments(&mut self.opt.phi_critic, self.phi.as_flat_mut(), phi_grad, &critic_segs);
        let sa = [self.layout.shared_actor.clone()];
        let sc = [self.layout.shared_critic.clone()];
        adam_segments(&mut self.opt.shared_actor, &mut self.shared, shared_grad, &sa);
        adam_segments(&mut self.opt.shared_critic, &mut self.shared, shared_grad, &sc);
        Ok(())
    }

    /// One optimiser step on `w_τ` from its own task's gradient.
    pub fn step_w(&mut self, task: usize, grad: &[f64]) -> Result<()> {
        self.check_task(task)?;
        if grad.len() != self.config.k {
            return Err(Error::dim("w gradient", &[self.config.k], &[grad.len()]));
        }
        self.opt.w[task].step(self.w.raw_mut(task), grad);
        self.w.project(task);
        Ok(())
    }

    /// Temperature step driven only by task `τ`'s entropy estimate.
    ///
    /// Loss `-log α · (target - H)`; its gradient is `H - target`.
    /// No-op when `Φ` is frozen.
    pub fn update_temperature(&mut self, task: usize, entropy: f64) -> Result<()> {
        self.check_task(task)?;
        if !entropy.is_finite() {
            return Err(Error::Numerics(format!("non-finite entropy for task {task}")));
        }
        if self.phi.is_frozen() {
            return Ok(());
        }
        let grad = entropy - self.config.target_entropy();
        let mut v = [self.log_alpha[task]];
        self.opt.alpha[task].step(&mut v, &[grad]);
        self.log_alpha[task] = v[0];
        Ok(())
    }

    pub fn update_temperatures(&mut self, entropies: &[(usize, f64)]) -> Result<()> {
        for &(task, h) in entropies {
            self.update_temperature(task, h)?;
        }
        Ok(())
    }

    /// Polyak-averages the critic blocks of the target copy and the target `W`.
    pub fn update_targets(&mut self) {
        let rho = self.config.polyak;
        let n = self.phi.n();
        for i in 0..self.phi.k() {
            let r = self.layout.phi_critic.clone();
            let online = &self.phi.column(i)[r.clone()];
            polyak_update(online, &mut self.target_phi.column_mut(i)[r], rho);
        }
        debug_assert_eq!(n, self.target_phi.n());
        let r = self.layout.shared_critic.clone();
        polyak_update(&self.shared[r.clone()], &mut self.target_shared[r], rho);
        for t in 0..self.w.tasks() {
            polyak_update(self.w.raw(t), self.target_w.raw_mut(t), rho);
        }
    }
}

fn concat_rows(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ra, ca) = a.dims2()?;
    let (rb, cb) = b.dims2()?;
    if ra != rb {
        return Err(Error::dim("concat", a.shape(), b.shape()));
    }
    let mut out = Vec::with_capacity(ra * (ca + cb));
    for r in 0..ra {
        out.extend_from_slice(a.row(r));
        out.extend_from_slice(b.row(r));
    }
    Tensor::matrix(ra, ca + cb, out)
}

/// Actor parameters for one task, detached from the agent.
#[derive(Clone, Debug)]
pub struct TaskPolicy {
    composed: Vec<f64>,
    shared: Vec<f64>,
    slots: Vec<Slot>,
    act_dim: usize,
    activation: Activation,
}

impl TaskPolicy {
    /// Mean and clamped log-std rows for a batch of observations.
    pub fn distribution(&self, states: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        let params = NetParams::gather(&self.slots, &self.composed, &self.shared);
        let out = mlp_forward(&params, states, self.activation)?;
        Ok(split_actor_output(&out, self.act_dim))
    }

    /// One action per row; components lie in `(-1, 1)`.
    pub fn act_batch<R: Rng + ?Sized>(&self, states: &Tensor, deterministic: bool, rng: &mut R) -> Result<Vec<f64>> {
        let (mean, log_std) = self.distribution(states)?;
        if deterministic {
            return Ok(mean.iter().map(|m| m.tanh()).collect());
        }
        let noise = standard_normal(rng, mean.len());
        Ok(squashed_sample(&mean, &log_std, &noise, self.act_dim).0)
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], deterministic: bool, rng: &mut R) -> Result<Vec<f64>> {
        let x = Tensor::matrix(1, state.len(), state.to_vec())?;
        self.act_batch(&x, deterministic, rng)
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }
}
