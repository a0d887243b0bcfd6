use serde::{Deserialize, Serialize};

use crate::diff::Tensor;
use crate::envs::{episode_seed, reset, scripted_action, shaping, step, SuiteState, TaskSpec, ACTION_DIM};
use crate::error::Result;
use crate::sac::{SacAgent, TaskPolicy};

/// Anything that maps a batch of states to actions.
pub trait Controller {
    fn actions(&self, spec: &TaskSpec, states: &[SuiteState]) -> Result<Vec<f64>>;
}

/// Deterministic (mean) action of a learned policy.
impl Controller for TaskPolicy {
    fn actions(&self, _spec: &TaskSpec, states: &[SuiteState]) -> Result<Vec<f64>> {
        let mut obs = Vec::new();
        for s in states {
            s.write_observation(&mut obs);
        }
        let cols = obs.len() / states.len();
        let x = Tensor::matrix(states.len(), cols, obs)?;
        let (mean, _) = self.distribution(&x)?;
        Ok(mean.iter().map(|m| m.tanh()).collect())
    }
}

/// The hand-written reference controller.
pub struct Scripted;

impl Controller for Scripted {
    fn actions(&self, spec: &TaskSpec, states: &[SuiteState]) -> Result<Vec<f64>> {
        Ok(states.iter().flat_map(|s| scripted_action(spec, s)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_task: Vec<f64>,
    pub mean: f64,
    pub seed: u64,
}

/// Per-episode outcome statistics of a batch of rollouts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub success: f64,
    /// Mean undiscounted return up to success or the horizon.
    pub mean_return: f64,
    /// Mean distance-to-goal term at the last step.
    pub mean_final_distance: f64,
    pub mean_length: f64,
}

/// Runs `episodes` freshly sampled episodes in lockstep.
///
/// An episode succeeds, and stops, as soon as the predicate holds. Episode
/// `e` resets with a seed derived from `(seed, skill id, e)`.
pub fn rollout_summary<C: Controller + ?Sized>(
    controller: &C,
    spec: &TaskSpec,
    episodes: usize,
    seed: u64,
) -> Result<RolloutSummary> {
    if episodes == 0 {
        return Ok(RolloutSummary {
            success: 0.0,
            mean_return: 0.0,
            mean_final_distance: 0.0,
            mean_length: 0.0,
        });
    }
    let mut states: Vec<SuiteState> = (0..episodes)
        .map(|e| reset(spec, episode_seed(seed, spec.skill_id as u64, e as u64)))
        .collect();
    let mut done = vec![false; episodes];
    let mut success = vec![false; episodes];
    let mut returns = vec![0.0; episodes];
    loop {
        let live: Vec<usize> = (0..episodes).filter(|&e| !done[e]).collect();
        if live.is_empty() {
            break;
        }
        let batch: Vec<SuiteState> = live.iter().map(|&e| states[e].clone()).collect();
        let actions = controller.actions(spec, &batch)?;
        for (i, &e) in live.iter().enumerate() {
            let out = step(spec, &mut states[e], &actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
            returns[e] += out.reward;
            if out.success {
                success[e] = true;
                done[e] = true;
            } else if out.done {
                done[e] = true;
            }
        }
    }
    let n = episodes as f64;
    Ok(RolloutSummary {
        success: success.iter().filter(|&&s| s).count() as f64 / n,
        mean_return: returns.iter().sum::<f64>() / n,
        mean_final_distance: states.iter().map(|s| shaping(spec, s)).sum::<f64>() / n,
        mean_length: states.iter().map(|s| s.t as f64).sum::<f64>() / n,
    })
}

/// Success rate of `controller` over `episodes` freshly sampled episodes.
pub fn evaluate_controller<C: Controller + ?Sized>(
    controller: &C,
    spec: &TaskSpec,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    Ok(rollout_summary(controller, spec, episodes, seed)?.success)
}

/// Evaluates agent task `task` on `spec` with the deterministic policy.
pub fn evaluate_task(agent: &SacAgent, task: usize, spec: &TaskSpec, episodes: usize, seed: u64) -> Result<f64> {
    let policy = agent.policy(task)?;
    evaluate_controller(&policy, spec, episodes, seed)
}

/// Per-skill and mean success; agent task `i` is evaluated on `specs[i]`.
pub fn evaluate(agent: &SacAgent, specs: &[TaskSpec], episodes: usize, seed: u64) -> Result<EvalResult> {
    let per_task = specs
        .iter()
        .enumerate()
        .map(|(t, spec)| evaluate_task(agent, t, spec, episodes, seed))
        .collect::<Result<Vec<_>>>()?;
    let mean = per_task.iter().sum::<f64>() / per_task.len().max(1) as f64;
    Ok(EvalResult { per_task, mean, seed })
}
