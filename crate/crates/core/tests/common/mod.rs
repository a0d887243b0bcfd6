//! Checks shared by the unit-level integration tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::DMatrix;
use paco::analysis::{pca, pca_with, symmetric_eigen};
use paco::compose::{
    build_structured_multihead, compose, init_w, CompositionalLayer, CompositionalMatrix, LayerShape, MlpLayout,
    ParameterSet, WInit,
};
use paco::diff::{Graph, Tensor};
use paco::sac::{mlp_forward, Activation, AgentConfig, Net, NetParams, PolicyNoise, SacAgent, TaskBatch};
use paco::trainer::{
    convex_combination, sample_simplex, sample_simplex_exponential, Injection, InjectionKind, RunConfig, Trainer,
    Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
}

pub fn random_states(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, random_vec(rng, rows * cols)).unwrap()
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub fn digest(v: &[f64]) -> Vec<u8> {
    let mut h = Sha256::new();
    for x in v {
        h.update(x.to_le_bytes());
    }
    h.finalize().to_vec()
}

// ---------------------------------------------------------------- layers

pub fn random_layer(rng: &mut ChaCha8Rng, k: usize, d_in: usize, d_out: usize) -> CompositionalLayer {
    let weights = (0..k)
        .map(|_| Tensor::matrix(d_in, d_out, random_vec(rng, d_in * d_out)).unwrap())
        .collect();
    let biases = (0..k).map(|_| Tensor::vector(random_vec(rng, d_out))).collect();
    CompositionalLayer::new(weights, biases).unwrap()
}

/// Mixes the banks with plain loops, then applies an ordinary affine map.
pub fn oracle_forward(layer: &CompositionalLayer, x: &[f64], rows: usize, w: &[f64]) -> Vec<f64> {
    let LayerShape { d_in, d_out } = layer.shape();
    let mut weight = vec![0.0; d_in * d_out];
    let mut bias = vec![0.0; d_out];
    for (i, wi) in w.iter().enumerate() {
        for (a, v) in weight.iter_mut().zip(layer.weights()[i].data()) {
            *a += wi * v;
        }
        for (a, v) in bias.iter_mut().zip(layer.biases()[i].data()) {
            *a += wi * v;
        }
    }
    let mut out = vec![0.0; rows * d_out];
    for r in 0..rows {
        for c in 0..d_out {
            let mut acc = bias[c];
            for p in 0..d_in {
                acc += x[r * d_in + p] * weight[p * d_out + c];
            }
            out[r * d_out + c] = acc;
        }
    }
    out
}

/// Forward output of random layers against the oracle; returns the worst error.
pub fn check_layer_forward(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..6);
        let (d_in, d_out, rows) = (rng.random_range(1..7), rng.random_range(1..7), rng.random_range(1..5));
        let layer = random_layer(&mut rng, k, d_in, d_out);
        let x = random_vec(&mut rng, rows * d_in);
        let w = random_vec(&mut rng, k);
        let mut g = Graph::new();
        let xv = g.constant(Tensor::matrix(rows, d_in, x.clone()).unwrap());
        let wv = g.param(Tensor::vector(w.clone()));
        let out = layer.forward(&mut g, xv, wv).unwrap().out;
        let expected = oracle_forward(&layer, &x, rows, &w);
        for (a, b) in g.value(out).data().iter().zip(&expected) {
            worst = worst.max((a - b).abs());
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
    worst
}

fn layer_loss(layer: &CompositionalLayer, x: &[f64], rows: usize, w: &[f64], coef: &[f64]) -> f64 {
    oracle_forward(layer, x, rows, w)
        .iter()
        .zip(coef)
        .map(|(y, c)| c * y.tanh())
        .sum()
}

/// Gradients wrt every bank entry and `w` against central differences;
/// returns the worst relative error.
pub fn check_layer_gradients(instances: usize, seed: u64) -> f64 {
    let h = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = rng.random_range(1..5);
        let (d_in, d_out, rows) = (rng.random_range(1..5), rng.random_range(1..5), 3);
        let layer = random_layer(&mut rng, k, d_in, d_out);
        let x = random_vec(&mut rng, rows * d_in);
        let w = random_vec(&mut rng, k);
        let coef = random_vec(&mut rng, rows * d_out);

        let mut g = Graph::new();
        let xv = g.constant(Tensor::matrix(rows, d_in, x.clone()).unwrap());
        let wv = g.param(Tensor::vector(w.clone()));
        let lo = layer.forward(&mut g, xv, wv).unwrap();
        let act = g.tanh(lo.out);
        let cv = g.constant(Tensor::matrix(rows, d_out, coef.clone()).unwrap());
        let weighted = g.mul(act, cv).unwrap();
        let loss = g.sum(weighted);
        assert!((g.value(loss).item() - layer_loss(&layer, &x, rows, &w, &coef)).abs() < 1e-12);
        let grads = g.backward(loss).unwrap();

        let perturbed = |bank: usize, is_bias: bool, j: usize, delta: f64| {
            let mut ws: Vec<Tensor> = layer.weights().to_vec();
            let mut bs: Vec<Tensor> = layer.biases().to_vec();
            let t = if is_bias { &mut bs[bank] } else { &mut ws[bank] };
            t.data_mut()[j] += delta;
            CompositionalLayer::new(ws, bs).unwrap()
        };
        for bank in 0..k {
            for (is_bias, var) in [(false, lo.weights[bank]), (true, lo.biases[bank])] {
                let analytic = grads.get(var);
                for j in 0..analytic.len() {
                    let plus = layer_loss(&perturbed(bank, is_bias, j, h), &x, rows, &w, &coef);
                    let minus = layer_loss(&perturbed(bank, is_bias, j, -h), &x, rows, &w, &coef);
                    let numeric = (plus - minus) / (2.0 * h);
                    let e = rel(analytic.data()[j], numeric);
                    worst = worst.max(e);
                    assert!(e < 1e-4, "bank {bank} bias {is_bias} entry {j}");
                }
            }
        }
        let gw = grads.get(wv);
        for j in 0..k {
            let mut wp = w.clone();
            wp[j] += h;
            let mut wm = w.clone();
            wm[j] -= h;
            let numeric = (layer_loss(&layer, &x, rows, &wp, &coef) - layer_loss(&layer, &x, rows, &wm, &coef)) / (2.0 * h);
            let e = rel(gw.data()[j], numeric);
            worst = worst.max(e);
            assert!(e < 1e-4, "w entry {j}");
        }
    }
    worst
}

// -------------------------------------------------------- instantiations

pub fn agent_config(tasks: usize, k: usize, seed: u64) -> AgentConfig {
    AgentConfig {
        obs_dim: 5,
        act_dim: 2,
        tasks,
        hidden: vec![8, 8],
        k,
        seed,
        w_init: WInit::OneHot,
        ..AgentConfig::default()
    }
}

/// One-hot `W` over block-dedicated columns against separately built
/// single-task agents; returns the worst difference.
pub fn check_one_hot_singles() -> f64 {
    let tasks = 3;
    let singles: Vec<SacAgent> = (0..tasks)
        .map(|t| SacAgent::new(agent_config(1, 1, 100 + t as u64)).unwrap())
        .collect();
    let columns: Vec<Vec<f64>> = singles.iter().map(|a| a.phi().column(0).to_vec()).collect();
    let phi = ParameterSet::from_columns(columns).unwrap();
    let w = init_w(tasks, tasks, WInit::OneHot, 0, false).unwrap();
    let multi = SacAgent::from_parts(agent_config(tasks, tasks, 0), phi, Vec::new(), w).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let states = random_states(&mut rng, 6, 5);
    let actions = random_states(&mut rng, 6, 2);
    let mut worst: f64 = 0.0;
    for (t, single) in singles.iter().enumerate() {
        let (m1, s1) = multi.policy(t).unwrap().distribution(&states).unwrap();
        let (m0, s0) = single.policy(0).unwrap().distribution(&states).unwrap();
        for (a, b) in m1.iter().chain(&s1).zip(m0.iter().chain(&s0)) {
            worst = worst.max((a - b).abs());
        }
        for net in [Net::Critic1, Net::Critic2] {
            let q1 = multi.critic_values(t, net, false, &states, &actions).unwrap();
            let q0 = single.critic_values(0, net, false, &states, &actions).unwrap();
            for (a, b) in q1.iter().zip(&q0) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-12, "single-task mismatch {worst}");
    worst
}

type Affine = (Vec<f64>, Vec<f64>, usize, usize);

/// Shared ReLU trunk followed by one head, written out with explicit loops.
fn reference_multihead(x: &[f64], rows: usize, trunk: &[Affine], head: &Affine) -> Vec<f64> {
    let affine = |h: &[f64], (w, b, d_in, d_out): &Affine| {
        let mut out = vec![0.0; rows * d_out];
        for r in 0..rows {
            for c in 0..*d_out {
                let mut acc = 0.0;
                for p in 0..*d_in {
                    acc += h[r * d_in + p] * w[p * d_out + c];
                }
                out[r * d_out + c] = acc + b[c];
            }
        }
        out
    };
    let mut h = x.to_vec();
    for layer in trunk {
        h = affine(&h, layer).into_iter().map(|v| v.max(0.0)).collect();
    }
    affine(&h, head)
}

/// Structured multi-head `Φ` against a hand-written multi-head network.
pub fn check_structured_multihead() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sizes = [4, 6, 5, 3];
    let layout = MlpLayout::from_sizes(&sizes);
    let mk = |rng: &mut ChaCha8Rng, s: LayerShape| (random_vec(rng, s.d_in * s.d_out), random_vec(rng, s.d_out), s.d_in, s.d_out);
    let trunk: Vec<_> = layout.layers[..2].iter().map(|&s| mk(&mut rng, s)).collect();
    let heads: Vec<_> = (0..3).map(|_| mk(&mut rng, layout.layers[2])).collect();
    let flat = |l: &Affine| [l.0.clone(), l.1.clone()].concat();
    let trunk_flat: Vec<f64> = trunk.iter().flat_map(flat).collect();
    let head_flat: Vec<Vec<f64>> = heads.iter().map(flat).collect();
    let phi = build_structured_multihead(&trunk_flat, &head_flat).unwrap();

    let rows = 5;
    let x = random_vec(&mut rng, rows * 4);
    let xt = Tensor::matrix(rows, 4, x.clone()).unwrap();
    let mut worst: f64 = 0.0;
    for (t, head) in heads.iter().enumerate() {
        let mut w = vec![0.0; 3];
        w[t] = 1.0;
        let theta = compose(&phi, &w).unwrap().theta;
        let mut offset = 0;
        let mut blocks = Vec::new();
        for s in &layout.layers {
            blocks.push((&theta[offset..offset + s.param_count()], *s));
            offset += s.param_count();
        }
        let params = NetParams { layers: blocks };
        let out = mlp_forward(&params, &xt, Activation::Relu).unwrap();
        let expected = reference_multihead(&x, rows, &trunk, head);
        for (a, b) in out.data().iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-12, "multi-head mismatch {worst}");
    worst
}

/// `K = 1` with `w = [1]` for every task is the plain shared network, bit for bit.
pub fn check_k_one_bitwise() {
    let tasks = 3;
    let base = SacAgent::new(agent_config(1, 1, 9)).unwrap();
    let phi = base.phi().clone();
    let w = CompositionalMatrix::new(1, vec![vec![1.0]; tasks], false).unwrap();
    let shared = SacAgent::from_parts(agent_config(tasks, 1, 9), phi.clone(), Vec::new(), w).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let states = random_states(&mut rng, 7, 5);
    let slots = base.layout().slots(Net::Actor);
    let plain = mlp_forward(&NetParams::gather(slots, phi.column(0), &[]), &states, Activation::Relu).unwrap();
    for t in 0..tasks {
        assert_eq!(bits(&shared.composed_theta(t).unwrap()), bits(phi.column(0)));
        let (mean, _) = shared.policy(t).unwrap().distribution(&states).unwrap();
        let expected: Vec<f64> = (0..7).flat_map(|r| plain.row(r)[..2].to_vec()).collect();
        assert_eq!(bits(&mean), bits(&expected));
    }
}

// --------------------------------------------------------------- trainer

pub fn small_run(variant: Variant, seed: u64) -> RunConfig {
    let mut run = RunConfig::default();
    run.agent.hidden = vec![16];
    run.agent.k = 2;
    run.trainer.variant = variant;
    run.trainer.seed = seed;
    run.trainer.batch_size = 24;
    run.trainer.parallel_envs = 3;
    run.trainer.total_env_steps = 600;
    run.trainer.exploration_steps = 60;
    run.trainer.env_steps_per_update = 3;
    run.trainer.buffer_capacity = 10_000;
    run.trainer.eval_interval = 300;
    run.trainer.eval_episodes = 2;
    run.trainer.log_interval = 10;
    run
}

/// Trainer with data in the buffer and the batches/noise for its next update.
pub fn primed(run: &RunConfig, seed: u64) -> (Trainer, Vec<TaskBatch>, Vec<PolicyNoise>) {
    let mut t = Trainer::new(run).unwrap();
    for _ in 0..40 {
        t.collect_step().unwrap();
    }
    let active = t.active().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batches = t.buffer().sample_balanced(&active, run.trainer.batch_size, &mut rng).unwrap();
    let noise = batches.iter().map(|b| PolicyNoise::sample(&mut rng, b.len(), 2)).collect();
    (t, batches, noise)
}

pub fn spike(task: usize, magnitude: f64) -> Injection {
    Injection {
        update: 0,
        task,
        kind: InjectionKind::LossSpike,
        magnitude,
    }
}

/// Random `(Φ, W, batch)` instances: each task loss ignores every other
/// task's `w` bit for bit, and the applied `Φ` step is the step for
/// `Σ_τ w_τ ⊗ ∂J_τ/∂θ_τ`. Returns the worst deviation of the gradient.
pub fn check_gradient_routing(instances: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..instances as u64 {
        let mut run = small_run(Variant::Vanilla, i);
        run.agent.k = 2 + (i as usize % 3);
        run.agent.normalize_w = i % 2 == 1;
        let (mut t, batches, noise) = primed(&run, 1000 + i);
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        for v in t.agent_mut().phi_mut().as_flat_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        for task in 0..3 {
            let w = random_vec(&mut rng, run.agent.k);
            t.agent_mut().reset_w(task, w).unwrap();
        }
        let before = t.agent().clone();
        let losses: Vec<_> = batches
            .iter()
            .zip(&noise)
            .map(|(b, nz)| before.task_loss(b, nz).unwrap())
            .collect();

        for (tau, l) in losses.iter().enumerate() {
            let mut other = before.clone();
            for o in (0..3).filter(|&o| o != tau) {
                other.reset_w(o, random_vec(&mut rng, run.agent.k)).unwrap();
            }
            let again = other.task_loss(&batches[tau], &noise[tau]).unwrap();
            assert_eq!(l.total.to_bits(), again.total.to_bits());
            assert_eq!(bits(&l.theta_grad), bits(&again.theta_grad));
            assert_eq!(bits(&l.w_grad), bits(&again.w_grad));
        }

        let out = t.update_with(&batches, &noise).unwrap();
        let n = before.phi().n();
        let k = run.agent.k;
        let mut expected = vec![0.0; n * k];
        for c in 0..k {
            for r in 0..n {
                expected[c * n + r] = losses.iter().map(|l| l.w_effective[c] * l.theta_grad[r]).sum();
            }
        }
        for (a, b) in out.phi_grad.iter().zip(&expected) {
            let e = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(e);
            assert!(e <= 1e-10, "{a} vs {b}");
        }
        let mut replay = before.clone();
        replay
            .step_task_agnostic(&expected, &before.shared_gradient(losses.iter()))
            .unwrap();
        for (a, b) in t.agent().phi().as_flat().iter().zip(replay.phi().as_flat()) {
            assert!((a - b).abs() <= 1e-10, "applied step {a} vs {b}");
        }
    }
    worst
}

/// Spike on one task: it is masked, left out of the `Φ` gradient, and with
/// reset on only its column of `W` changes.
pub fn check_spike_maskout_and_reset() {
    let mut run = small_run(Variant::MaskoutOnly, 1);
    run.trainer.injections = vec![spike(1, 2.0)];
    let (mut t, batches, noise) = primed(&run, 99);
    let before = t.agent().clone();
    let out = t.update_with(&batches, &noise).unwrap();

    assert_eq!(out.report.masked, vec![1]);
    assert_eq!(out.report.losses[1], 2.0 * run.trainer.epsilon);
    assert_eq!(out.included, vec![0, 2]);
    let mut expected = vec![0.0; before.phi().as_flat().len()];
    for i in [0, 2] {
        before.task_loss(&batches[i], &noise[i]).unwrap().accumulate_phi_grad(&mut expected);
    }
    assert_eq!(out.phi_grad.len(), expected.len());
    for (a, b) in out.phi_grad.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
    }
    assert_eq!(t.agent().w().raw(1), before.w().raw(1));
    assert_ne!(t.agent().w().raw(0), before.w().raw(0));
    assert_eq!(t.record().masks.len(), 1);

    let mut run = small_run(Variant::MaskoutOnly, 4);
    run.trainer.injections = vec![spike(2, 2.0)];
    let (mut masked_only, batches, noise) = primed(&run, 99);
    run.trainer.variant = Variant::Paco;
    let (mut paco, batches_p, noise_p) = primed(&run, 99);
    assert_eq!(batches[0].states, batches_p[0].states);
    masked_only.update_with(&batches, &noise).unwrap();
    let out = paco.update_with(&batches_p, &noise_p).unwrap();

    let a = masked_only.agent().w().vectors();
    let b = paco.agent().w().vectors();
    for t in 0..3 {
        if t == 2 {
            assert_ne!(digest(&a[t]), digest(&b[t]));
        } else {
            assert_eq!(digest(&a[t]), digest(&b[t]), "column {t} changed");
        }
    }
    assert_eq!(digest(paco.agent().phi().as_flat()), digest(masked_only.agent().phi().as_flat()));

    let event = &out.resets[0];
    assert_eq!(event.task, 2);
    assert_eq!(event.valid, vec![0, 1]);
    assert!(event.beta.iter().all(|&x| x >= 0.0));
    assert!((event.beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(convex_combination(&event.beta, &[&b[0], &b[1]]), event.new_w);
    assert_eq!(b[2], event.new_w);
}

/// `draws` simplex samples per size and sampler: moments of the uniform
/// distribution, nonnegativity and unit sum.
pub fn check_simplex_uniformity(draws: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for m in [2usize, 3, 5] {
        for sampler in [sample_simplex::<ChaCha8Rng>, sample_simplex_exponential::<ChaCha8Rng>] {
            let mut sum = vec![0.0; m];
            let mut sq = vec![0.0; m];
            for _ in 0..draws {
                let b = sampler(m, &mut rng);
                assert!(b.iter().all(|&x| x >= 0.0));
                assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for i in 0..m {
                    sum[i] += b[i];
                    sq[i] += b[i] * b[i];
                }
            }
            // Each coordinate is Beta(1, m - 1).
            let mf = m as f64;
            let mean = 1.0 / mf;
            let var = (mf - 1.0) / (mf * mf * (mf + 1.0));
            let se = (var / draws as f64).sqrt();
            for i in 0..m {
                let got = sum[i] / draws as f64;
                assert!((got - mean).abs() < 3.0 * se, "m={m} coord {i}: {got}");
                let second = sq[i] / draws as f64;
                let expected = var + mean * mean;
                assert!((second - expected).abs() < 0.02 * expected, "m={m} coord {i}: {second}");
            }
        }
    }
}

// ------------------------------------------------------------------ PCA

pub fn cloud(rng: &mut ChaCha8Rng, t: usize, k: usize) -> Vec<Vec<f64>> {
    // Anisotropic so the eigenvalues are well separated.
    (0..t)
        .map(|_| (0..k).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect())
        .collect()
}

fn covariance(v: &[Vec<f64>]) -> DMatrix<f64> {
    let t = v.len();
    let k = v[0].len();
    let x = DMatrix::from_fn(t, k, |i, j| v[i][j]);
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c.transpose() * &c / t as f64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenpairs of random 5-D cloud covariances against nalgebra; returns
/// the worst difference.
pub fn check_eigen_oracle(instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let v = cloud(&mut rng, 12, 5);
        let cov = covariance(&v);
        let flat: Vec<f64> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).map(|(i, j)| cov[(i, j)]).collect();
        let (values, vectors) = symmetric_eigen(&flat, 5).unwrap();
        let reference = cov.clone().symmetric_eigen();
        let mut ref_values: Vec<f64> = reference.eigenvalues.iter().copied().collect();
        ref_values.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in values.iter().zip(&ref_values) {
            worst = worst.max((a - b).abs());
        }
        for (i, vec) in vectors.iter().enumerate() {
            let j = reference
                .eigenvalues
                .iter()
                .position(|&l| (l - values[i]).abs() < 1e-8)
                .expect("eigenvalue missing from reference");
            let r: Vec<f64> = reference.eigenvectors.column(j).iter().copied().collect();
            let sign = dot(vec, &r).signum();
            for (a, b) in vec.iter().zip(&r) {
                worst = worst.max((a - sign * b).abs());
            }
        }
        // The PCA path uses the same covariance.
        let p = pca_with(&v, 5).unwrap();
        for (a, b) in p.variances.iter().zip(&ref_values) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-8, "eigen mismatch {worst}");
    worst
}

/// Orthonormal directions, exact full-rank reconstruction, coordinate
/// variances equal to the eigenvalues.
pub fn check_pca_invariants(instances: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..instances {
        let v = cloud(&mut rng, 10, 5);
        let p = pca_with(&v, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&p.directions[i], &p.directions[j]) - expected).abs() < 1e-10);
            }
        }
        for (a, b) in p.reconstruct().iter().zip(&v) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        assert!((p.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(p.variances.windows(2).all(|w| w[0] >= w[1]));
        for c in 0..5 {
            let var: f64 = p.coordinates.iter().map(|x| x[c] * x[c]).sum::<f64>() / v.len() as f64;
            assert!((var - p.variances[c]).abs() < 1e-10);
        }
    }
}

pub fn check_degenerate_cloud() {
    let v = vec![vec![0.3, -0.2, 0.9, 0.1]; 6];
    let p = pca(&v).unwrap();
    assert!(p.variances.iter().all(|&x| x == 0.0));
    assert!(p.explained_ratio.iter().all(|&x| x == 0.0));
    assert!(p.coordinates.iter().flatten().all(|&x| x == 0.0));
    assert_eq!(p.reconstruct(), v);
}
