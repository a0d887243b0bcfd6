use paco::compose::CompositionScope;
use paco::diff::Tensor;
use paco::sac::{
    polyak_update, Activation, AgentConfig, Net, PolicyNoise, ReplayBuffer, SacAgent, TaskBatch, Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBS: usize = 3;
const ACT: usize = 2;

fn config(tasks: usize, k: usize) -> AgentConfig {
    AgentConfig {
        obs_dim: OBS,
        act_dim: ACT,
        tasks,
        hidden: vec![6, 5],
        activation: Activation::Tanh,
        k,
        seed: 11,
        ..AgentConfig::default()
    }
}

fn batch(task: usize, rows: usize, seed: u64) -> TaskBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let states = u(rows * OBS);
    let actions = u(rows * ACT);
    let rewards = u(rows);
    let next_states = u(rows * OBS);
    TaskBatch {
        task,
        states: Tensor::matrix(rows, OBS, states).unwrap(),
        actions: Tensor::matrix(rows, ACT, actions).unwrap(),
        rewards,
        next_states: Tensor::matrix(rows, OBS, next_states).unwrap(),
        dones: (0..rows).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect(),
        task_ids: vec![task; rows],
    }
}

fn noise(rows: usize, seed: u64) -> PolicyNoise {
    PolicyNoise::sample(&mut ChaCha8Rng::seed_from_u64(seed), rows, ACT)
}

/// Spreads the identical initial columns apart so `Φ` has full rank.
fn perturb_phi(agent: &mut SacAgent, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in agent.phi_mut().as_flat_mut() {
        *v += rng.random_range(-0.2..0.2);
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()).max(1e-6))
}

#[test]
fn other_tasks_w_has_no_effect_on_a_task_loss() {
    let mut agent = SacAgent::new(config(3, 3)).unwrap();
    perturb_phi(&mut agent, 1);
    let b = batch(0, 8, 2);
    let nz = noise(8, 3);
    let before = agent.task_loss(&b, &nz).unwrap();
    agent.reset_w(1, vec![5.0, -3.0, 2.0]).unwrap();
    agent.reset_w(2, vec![0.0, 0.0, 0.0]).unwrap();
    let after = agent.task_loss(&b, &nz).unwrap();
    assert_eq!(before.total.to_bits(), after.total.to_bits());
    assert_eq!(before.w_grad, after.w_grad);
}

#[test]
fn w_update_touches_only_its_task() {
    let mut agent = SacAgent::new(config(3, 2)).unwrap();
    let others: Vec<Vec<f64>> = agent.w().vectors().to_vec();
    let l = agent.task_loss(&batch(1, 6, 4), &noise(6, 5)).unwrap();
    agent.step_w(1, &l.w_grad).unwrap();
    assert_eq!(agent.w().raw(0), others[0].as_slice());
    assert_eq!(agent.w().raw(2), others[2].as_slice());
    assert_ne!(agent.w().raw(1), others[1].as_slice());
}

#[test]
fn phi_gradient_is_sum_of_outer_products() {
    let mut agent = SacAgent::new(config(3, 3)).unwrap();
    perturb_phi(&mut agent, 7);
    let losses: Vec<_> = (0..3)
        .map(|t| agent.task_loss(&batch(t, 5, 10 + t as u64), &noise(5, 20 + t as u64)).unwrap())
        .collect();
    let total = agent.phi_gradient(&losses);
    let n = agent.phi().n();
    for i in 0..3 {
        for r in 0..n {
            let expected: f64 = losses.iter().map(|l| l.w_effective[i] * l.theta_grad[r]).sum();
            assert!((total[i * n + r] - expected).abs() <= 1e-10 * expected.abs().max(1.0));
        }
    }
    let subset = agent.phi_gradient(&losses[..1]);
    assert_eq!(subset, losses[0].phi_grad());
}

/// Actor rows: finite differences of `J`. Critic rows: finite differences of
/// the critic loss only, since the actor term treats critic weights as
/// constants. `γ = 0` removes the target's dependence on the actor.
#[test]
fn phi_gradient_matches_finite_differences() {
    let mut cfg = config(2, 2);
    cfg.gamma = 0.0;
    cfg.init_log_alpha = (0.3f64).ln();
    let mut agent = SacAgent::new(cfg).unwrap();
    perturb_phi(&mut agent, 3);
    agent.reset_w(0, vec![0.7, -0.4]).unwrap();
    let b = batch(0, 7, 9);
    let nz = noise(7, 8);
    let analytic = agent.task_loss(&b, &nz).unwrap().phi_grad();
    let n = agent.phi().n();
    let critic_rows = agent.layout().phi_critic.clone();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let i = rng.random_range(0..2);
        let r = rng.random_range(0..n);
        let idx = i * n + r;
        let in_critic = critic_rows.contains(&r);
        let eval = |agent: &SacAgent| {
            let l = agent.task_loss(&b, &nz).unwrap();
            if in_critic {
                l.critic_loss
            } else {
                l.total
            }
        };
        let orig = agent.phi().as_flat()[idx];
        agent.phi_mut().as_flat_mut()[idx] = orig + h;
        let plus = eval(&agent);
        agent.phi_mut().as_flat_mut()[idx] = orig - h;
        let minus = eval(&agent);
        agent.phi_mut().as_flat_mut()[idx] = orig;
        let fd = (plus - minus) / (2.0 * h);
        assert!(
            rel_err(fd, analytic[idx]) < 1e-4 || (fd - analytic[idx]).abs() < 1e-8,
            "row {r} col {i}: fd {fd} vs {}",
            analytic[idx]
        );
    }
}

#[test]
fn w_gradient_matches_finite_differences() {
    for normalize in [false, true] {
        let mut cfg = config(2, 3);
        cfg.gamma = 0.0;
        cfg.scope = CompositionScope::ActorOnly;
        cfg.normalize_w = normalize;
        let mut agent = SacAgent::new(cfg).unwrap();
        perturb_phi(&mut agent, 4);
        let base = vec![0.5, -0.8, 0.3];
        agent.reset_w(1, base.clone()).unwrap();
        let base = agent.w().raw(1).to_vec();
        let b = batch(1, 6, 1);
        let nz = noise(6, 2);
        let analytic = agent.task_loss(&b, &nz).unwrap().w_grad;
        let h = 1e-6;
        for i in 0..3 {
            // Re-projection leaves w/|w| unchanged, so it does not affect J.
            let eval = |delta: f64| {
                let mut a = agent.clone();
                let mut w = base.clone();
                w[i] += delta;
                a.reset_w(1, w).unwrap();
                a.task_loss(&b, &nz).unwrap().total
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(rel_err(fd, analytic[i]) < 1e-4, "normalize={normalize} i={i}: {fd} vs {}", analytic[i]);
        }
    }
}

#[test]
fn degenerate_critic_target_is_reward() {
    let mut cfg = config(1, 2);
    cfg.gamma = 0.0;
    let agent = SacAgent::new(cfg).unwrap();
    let b = batch(0, 9, 12);
    let loss = agent.task_loss(&b, &noise(9, 1)).unwrap();
    let q1 = agent.critic_values(0, Net::Critic1, false, &b.states, &b.actions).unwrap();
    let q2 = agent.critic_values(0, Net::Critic2, false, &b.states, &b.actions).unwrap();
    let mse = |q: &[f64]| q.iter().zip(&b.rewards).map(|(q, r)| (q - r).powi(2)).sum::<f64>() / 9.0;
    assert!((loss.critic_loss - (mse(&q1) + mse(&q2))).abs() < 1e-12);
}

/// Critic loss rebuilt by hand from the public forward passes.
#[test]
fn critic_loss_matches_hand_computed_target() {
    let mut cfg = config(2, 2);
    cfg.gamma = 0.9;
    cfg.init_log_alpha = (0.2f64).ln();
    let mut agent = SacAgent::new(cfg).unwrap();
    perturb_phi(&mut agent, 8);
    for _ in 0..3 {
        // Move online weights so target and online differ.
        let l = agent.task_loss(&batch(1, 4, 30), &noise(4, 31)).unwrap();
        let g = agent.phi_gradient([&l]);
        let s = agent.shared_gradient([&l]);
        agent.step_task_agnostic(&g, &s).unwrap();
    }
    let rows = 5;
    let b = batch(1, rows, 40);
    let nz = noise(rows, 41);
    let loss = agent.task_loss(&b, &nz).unwrap();

    let (mean, log_std) = agent.policy(1).unwrap().distribution(&b.next_states).unwrap();
    let mut next_actions = Vec::new();
    let mut logp = Vec::new();
    for r in 0..rows {
        let mut lp = 0.0;
        for c in 0..ACT {
            let i = r * ACT + c;
            let u = mean[i] + log_std[i].exp() * nz.next[i];
            let a = u.tanh();
            next_actions.push(a);
            lp += -0.5 * nz.next[i].powi(2) - log_std[i] - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - a * a).ln();
        }
        logp.push(lp);
    }
    let na = Tensor::matrix(rows, ACT, next_actions).unwrap();
    let t1 = agent.critic_values(1, Net::Critic1, true, &b.next_states, &na).unwrap();
    let t2 = agent.critic_values(1, Net::Critic2, true, &b.next_states, &na).unwrap();
    assert!(t1.iter().zip(&t2).any(|(a, b)| a != b));
    let alpha = agent.alpha(1);
    let y: Vec<f64> = (0..rows)
        .map(|i| b.rewards[i] + 0.9 * (1.0 - b.dones[i]) * (t1[i].min(t2[i]) - alpha * logp[i]))
        .collect();
    let q1 = agent.critic_values(1, Net::Critic1, false, &b.states, &b.actions).unwrap();
    let q2 = agent.critic_values(1, Net::Critic2, false, &b.states, &b.actions).unwrap();
    let mse = |q: &[f64]| q.iter().zip(&y).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / rows as f64;
    assert!((loss.critic_loss - (mse(&q1) + mse(&q2))).abs() < 1e-10);

    // Using either critic alone instead of the minimum changes the loss.
    let y_max: Vec<f64> = (0..rows)
        .map(|i| b.rewards[i] + 0.9 * (1.0 - b.dones[i]) * (t1[i].max(t2[i]) - alpha * logp[i]))
        .collect();
    assert!(y.iter().zip(&y_max).all(|(a, b)| a <= b));
    let mse_max = |q: &[f64]| q.iter().zip(&y_max).map(|(q, y)| (q - y).powi(2)).sum::<f64>() / rows as f64;
    assert!((loss.critic_loss - (mse_max(&q1) + mse_max(&q2))).abs() > 1e-9);
}

#[test]
fn polyak_converges_geometrically() {
    let rho = 0.05;
    let online = vec![2.0, -1.0, 0.5];
    let start = vec![0.0, 3.0, 0.5];
    let mut target = start.clone();
    for _ in 0..40 {
        polyak_update(&online, &mut target, rho);
    }
    for i in 0..3 {
        let expected = online[i] + (1.0 - rho).powi(40) * (start[i] - online[i]);
        assert!((target[i] - expected).abs() < 1e-12);
    }
}

#[test]
fn target_tracks_only_critic_rows() {
    let mut cfg = config(1, 2);
    cfg.polyak = 0.1;
    let mut agent = SacAgent::new(cfg).unwrap();
    let start = agent.target_phi().clone();
    perturb_phi(&mut agent, 2);
    for _ in 0..25 {
        agent.update_targets();
    }
    let n = agent.phi().n();
    let critic = agent.layout().phi_critic.clone();
    for i in 0..2 {
        for r in 0..n {
            let t = agent.target_phi().column(i)[r];
            if critic.contains(&r) {
                let on = agent.phi().column(i)[r];
                let expected = on + 0.9f64.powi(25) * (start.column(i)[r] - on);
                assert!((t - expected).abs() < 1e-12);
            } else {
                assert_eq!(t, start.column(i)[r]);
            }
        }
    }
}

#[test]
fn target_w_lags_the_online_vector_and_snaps_on_reset() {
    let mut cfg = config(2, 2);
    cfg.polyak = 0.1;
    let mut agent = SacAgent::new(cfg).unwrap();
    let start = agent.w().raw(0).to_vec();
    let other = agent.target_w().raw(1).to_vec();
    agent.step_w(0, &[1.0, -2.0]).unwrap();
    let online = agent.w().raw(0).to_vec();
    assert_eq!(agent.target_w().raw(0), start.as_slice());
    for _ in 0..10 {
        agent.update_targets();
    }
    for i in 0..2 {
        let expected = online[i] + 0.9f64.powi(10) * (start[i] - online[i]);
        assert!((agent.target_w().raw(0)[i] - expected).abs() < 1e-12);
    }
    assert_eq!(agent.target_w().raw(1), other.as_slice());
    agent.reset_w(0, vec![0.3, 0.7]).unwrap();
    assert_eq!(agent.target_w().raw(0), agent.w().raw(0));
}

#[test]
fn temperature_updates_are_isolated_per_task() {
    let mut agent = SacAgent::new(config(3, 2)).unwrap();
    let target = agent.config().target_entropy();
    assert_eq!(target, -(ACT as f64));
    let before = agent.log_alpha().to_vec();
    agent.update_temperature(2, target + 0.5).unwrap();
    assert_eq!(agent.log_alpha()[0], before[0]);
    assert_eq!(agent.log_alpha()[1], before[1]);
    assert!(agent.log_alpha()[2] < before[2]);
    assert!(agent.update_temperature(3, 0.0).is_err());
}

#[test]
fn frozen_phi_does_not_move() {
    let mut agent = SacAgent::new(config(2, 2)).unwrap();
    agent.freeze_phi();
    let phi = agent.phi().clone();
    let shared = agent.shared().to_vec();
    let l = agent.task_loss(&batch(0, 4, 1), &noise(4, 1)).unwrap();
    let g = agent.phi_gradient([&l]);
    let s = agent.shared_gradient([&l]);
    agent.step_task_agnostic(&g, &s).unwrap();
    assert_eq!(agent.phi().as_flat(), phi.as_flat());
    assert_eq!(agent.shared(), shared.as_slice());
    agent.step_w(0, &l.w_grad).unwrap();
    agent.unfreeze_phi();
    agent.step_task_agnostic(&g, &s).unwrap();
    assert_ne!(agent.phi().as_flat(), phi.as_flat());
}

/// `E[tanh(μ + σε)]` against quadrature over `ε`.
#[test]
fn stochastic_action_mean_matches_quadrature() {
    let agent = SacAgent::new(config(1, 1)).unwrap();
    let policy = agent.policy(0).unwrap();
    let state = [0.3, -0.6, 0.9];
    let x = Tensor::matrix(1, OBS, state.to_vec()).unwrap();
    let (mean, log_std) = policy.distribution(&x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 40_000;
    let mut sum = vec![0.0; ACT];
    for _ in 0..draws {
        let a = policy.act(&state, false, &mut rng).unwrap();
        for c in 0..ACT {
            sum[c] += a[c];
        }
    }
    for c in 0..ACT {
        let sigma = log_std[c].exp();
        let steps = 20_000;
        let (lo, hi) = (-10.0, 10.0);
        let dx = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for i in 0..=steps {
            let e = lo + i as f64 * dx;
            let wgt = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let pdf = (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt();
            integral += wgt * pdf * (mean[c] + sigma * e).tanh() * dx;
        }
        let mc = sum[c] / draws as f64;
        // 4 standard errors of a variable bounded in (-1, 1)
        assert!((mc - integral).abs() < 4.0 / (draws as f64).sqrt(), "{mc} vs {integral}");
    }
}

/// Two-state chain `s0 → s1 → s0`, reward 1 in `s0`, action-independent.
/// With `α = 0` the soft evaluation is plain evaluation:
/// `Q(s0) = 1/(1-γ²)`, `Q(s1) = γ/(1-γ²)`.
#[test]
fn critic_fits_two_state_chain_values() {
    let gamma = 0.5;
    let cfg = AgentConfig {
        obs_dim: 2,
        act_dim: 1,
        tasks: 1,
        hidden: vec![16],
        activation: Activation::Tanh,
        k: 1,
        gamma,
        polyak: 0.05,
        actor_lr: 0.0,
        alpha_lr: 0.0,
        critic_lr: 3e-3,
        init_log_alpha: -1e3,
        seed: 5,
        ..AgentConfig::default()
    };
    let mut agent = SacAgent::new(cfg).unwrap();
    let mut buf = ReplayBuffer::new(1000, 2, 1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let one_hot = |s: usize| if s == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
    for i in 0..400 {
        let s = i % 2;
        buf.push(Transition {
            state: one_hot(s),
            action: vec![rng.random_range(-1.0..1.0)],
            reward: if s == 0 { 1.0 } else { 0.0 },
            next_state: one_hot(1 - s),
            done: false,
            task: 0,
        })
        .unwrap();
    }
    for _ in 0..3000 {
        let b = buf.sample_task(0, 32, &mut rng).unwrap();
        let nz = PolicyNoise::sample(&mut rng, 32, 1);
        let l = agent.task_loss(&b, &nz).unwrap();
        let g = agent.phi_gradient([&l]);
        let s = agent.shared_gradient([&l]);
        agent.step_task_agnostic(&g, &s).unwrap();
        agent.update_targets();
    }
    let expected = [1.0 / (1.0 - gamma * gamma), gamma / (1.0 - gamma * gamma)];
    for s in 0..2 {
        let x = Tensor::matrix(1, 2, one_hot(s)).unwrap();
        let a = Tensor::matrix(1, 1, vec![0.2]).unwrap();
        for net in [Net::Critic1, Net::Critic2] {
            let q = agent.critic_values(0, net, false, &x, &a).unwrap()[0];
            assert!((q - expected[s]).abs() < 0.05, "state {s} {net:?}: {q} vs {}", expected[s]);
        }
    }
}
