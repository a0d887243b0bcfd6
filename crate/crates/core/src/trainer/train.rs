use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{InjectionKind, RunConfig, TrainConfig, Variant};
use super::eval::{evaluate_task, EvalResult};
use super::reset::{exceeds, maskout, w_reset, LossReport, ResetEvent};
use crate::checkpoint::Checkpoint;
use crate::compose::init_w;
use crate::compose::WInit;
use crate::diff::Tensor;
use crate::envs::{episode_seed, Suite, TaskEnv, TaskSpec};
use crate::error::{Error, Result};
use crate::sac::{PolicyNoise, ReplayBuffer, SacAgent, TaskBatch, TaskLoss, TaskPolicy, Transition};

const EVAL_STREAM: u64 = 0xE7A1;
const TRANSFER_PROBE_ROWS: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub update: u64,
    pub env_step: u64,
    /// `J_τ` per active task.
    pub losses: Vec<f64>,
    pub masked: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub update: u64,
    pub env_step: u64,
    pub result: EvalResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskEvent {
    pub update: u64,
    pub env_step: u64,
    pub task: usize,
    pub loss: f64,
}

/// Append-only log of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub task_names: Vec<String>,
    pub loss_rows: Vec<LossRow>,
    pub evals: Vec<EvalRecord>,
    pub masks: Vec<MaskEvent>,
    pub resets: Vec<ResetEvent>,
    /// `(update, task)` pairs whose reset was skipped because `V` was empty.
    pub skipped_resets: Vec<(u64, usize)>,
    pub clamped_actions: u64,
    pub wall_clock_secs: f64,
    /// Env step of the evaluation whose `w` was restored at the end, if any.
    pub restored_best: Option<u64>,
}

impl TrainRecord {
    pub fn final_eval(&self) -> Option<&EvalResult> {
        self.evals.last().map(|e| &e.result)
    }

    /// The evaluation matching the parameters the run ended with.
    pub fn selected_eval(&self) -> Option<&EvalResult> {
        match self.restored_best {
            Some(step) => self.evals.iter().find(|e| e.env_step == step).map(|e| &e.result),
            None => self.final_eval(),
        }
    }
}

/// Everything an update computed and applied.
#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    pub update: u64,
    pub report: LossReport,
    /// One loss per active task (after any injected spike).
    pub losses: Vec<TaskLoss>,
    /// Tasks whose gradients entered the `Φ` step.
    pub included: Vec<usize>,
    /// Gradient handed to the `Φ` optimiser (zero if nothing was included).
    pub phi_grad: Vec<f64>,
    pub shared_grad: Vec<f64>,
    pub resets: Vec<ResetEvent>,
}

/// Output directory: metrics CSV, checkpoints and run metadata.
pub struct RunWriter {
    dir: PathBuf,
    metrics: BufWriter<File>,
}

impl RunWriter {
    pub fn create(dir: &Path, task_names: &[String]) -> Result<Self> {
        std::fs::create_dir_all(dir.join("checkpoints"))?;
        let mut metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        let mut header = vec!["kind".to_string(), "env_step".into(), "update".into()];
        header.extend(task_names.iter().map(|n| format!("loss_{n}")));
        header.extend(task_names.iter().map(|n| format!("success_{n}")));
        header.extend(["mean_success".into(), "masked".into(), "reset".into()]);
        writeln!(metrics, "{}", header.join(","))?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            metrics,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        writeln!(self.metrics, "{}", fields.join(","))?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.metrics.flush()?;
        Ok(())
    }
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

struct EnvSlot {
    env: TaskEnv,
    task: usize,
    stream: u64,
    episode: u64,
    obs: Vec<f64>,
}

/// Drives data collection and updates for a set of active tasks.
pub struct Trainer {
    config: TrainConfig,
    run: Option<RunConfig>,
    specs: Vec<TaskSpec>,
    active: Vec<usize>,
    agent: SacAgent,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    envs: Vec<EnvSlot>,
    policies: Vec<Option<TaskPolicy>>,
    env_steps: u64,
    updates: u64,
    pending: u64,
    evals_done: u64,
    next_eval: u64,
    next_checkpoint: u64,
    record: TrainRecord,
    writer: Option<RunWriter>,
    keep_best: bool,
    best: Option<BestSnapshot>,
}

/// Active tasks' `(w, log α)` at the best evaluation so far.
#[derive(Clone, Debug)]
struct BestSnapshot {
    mean: f64,
    env_step: u64,
    tasks: Vec<(usize, Vec<f64>, f64)>,
}

impl Trainer {
    /// Fresh agent for every task of the configured suite.
    pub fn new(run: &RunConfig) -> Result<Self> {
        run.validate()?;
        let suite = Suite::from_config(&run.suite)?;
        let seed = run.trainer.seed;
        let cfg = run.agent.agent_config(suite.obs_dim(), suite.act_dim(), suite.len(), seed);
        let agent = SacAgent::new(cfg)?;
        let active: Vec<usize> = (0..suite.len()).collect();
        let mut t = Self::with_agent(agent, suite.specs, active, run.trainer.clone())?;
        t.run = Some(run.clone());
        Ok(t)
    }

    /// Trains `active` tasks of an existing agent; `specs[t]` describes task `t`.
    pub fn with_agent(agent: SacAgent, specs: Vec<TaskSpec>, active: Vec<usize>, config: TrainConfig) -> Result<Self> {
        if specs.len() != agent.tasks() {
            return Err(Error::Config(format!(
                "{} task specs for an agent with {} tasks",
                specs.len(),
                agent.tasks()
            )));
        }
        if active.is_empty() {
            return Err(Error::Config("no tasks to train".into()));
        }
        for &t in &active {
            agent.check_task(t)?;
        }
        if config.batch_size % active.len() != 0 {
            return Err(Error::Config(format!(
                "trainer.batch_size: {} does not split evenly over {} tasks",
                config.batch_size,
                active.len()
            )));
        }
        let obs_dim = agent.config().obs_dim;
        for s in &specs {
            if crate::envs::observation_dim(s.num_skills) != obs_dim {
                return Err(Error::Config(format!("task '{}' does not match the agent's observation size", s.name)));
            }
        }
        let seed = config.seed;
        let envs = (0..config.parallel_envs)
            .map(|i| {
                let task = active[i % active.len()];
                let stream = i as u64;
                let env = TaskEnv::new(specs[task].clone(), episode_seed(seed, stream, 0));
                let obs = env.observation();
                EnvSlot {
                    env,
                    task,
                    stream,
                    episode: 0,
                    obs,
                }
            })
            .collect();
        let buffer = ReplayBuffer::new(config.buffer_capacity, obs_dim, agent.config().act_dim, agent.tasks());
        let record = TrainRecord {
            task_names: active.iter().map(|&t| specs[t].name.clone()).collect(),
            ..TrainRecord::default()
        };
        let mut t = Trainer {
            rng: ChaCha8Rng::seed_from_u64(seed),
            policies: vec![None; agent.tasks()],
            next_eval: config.eval_interval,
            next_checkpoint: config.checkpoint_interval,
            config,
            run: None,
            specs,
            active,
            agent,
            buffer,
            envs,
            env_steps: 0,
            updates: 0,
            pending: 0,
            evals_done: 0,
            record,
            writer: None,
            keep_best: false,
            best: None,
        };
        t.refresh_policies()?;
        Ok(t)
    }

    /// Ends the run with the active tasks' `w` and temperature from the
    /// best-scoring evaluation rather than the last one.
    pub fn keep_best_w(&mut self) {
        self.keep_best = true;
    }

    /// Streams metrics, checkpoints and metadata into `dir`.
    pub fn write_to(&mut self, dir: &Path) -> Result<()> {
        self.writer = Some(RunWriter::create(dir, &self.record.task_names)?);
        Ok(())
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut SacAgent {
        &mut self.agent
    }

    pub fn into_agent(self) -> SacAgent {
        self.agent
    }

    pub fn specs(&self) -> &[TaskSpec] {
        &self.specs
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn record(&self) -> &TrainRecord {
        &self.record
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn refresh_policies(&mut self) -> Result<()> {
        for &t in &self.active {
            self.policies[t] = Some(self.agent.policy(t)?);
        }
        Ok(())
    }

    /// One action per environment, then one step of every environment.
    pub fn collect_step(&mut self) -> Result<()> {
        let act_dim = self.agent.config().act_dim;
        let mut actions: Vec<Vec<f64>> = vec![Vec::new(); self.envs.len()];
        if self.env_steps < self.config.exploration_steps {
            for a in actions.iter_mut() {
                *a = (0..act_dim).map(|_| self.rng.random_range(-1.0..1.0)).collect();
            }
        } else {
            for &task in &self.active {
                let idx: Vec<usize> = (0..self.envs.len()).filter(|&i| self.envs[i].task == task).collect();
                if idx.is_empty() {
                    continue;
                }
                let mut obs = Vec::with_capacity(idx.len() * self.envs[idx[0]].obs.len());
                for &i in &idx {
                    obs.extend_from_slice(&self.envs[i].obs);
                }
                let x = Tensor::matrix(idx.len(), obs.len() / idx.len(), obs)?;
                let policy = self.policies[task].as_ref().expect("policy for active task");
                let a = policy.act_batch(&x, false, &mut self.rng)?;
                for (j, &i) in idx.iter().enumerate() {
                    actions[i] = a[j * act_dim..(j + 1) * act_dim].to_vec();
                }
            }
        }
        let seed = self.config.seed;
        for (slot, action) in self.envs.iter_mut().zip(actions) {
            let out = slot.env.step(&action);
            let next = slot.env.observation();
            self.buffer.push(Transition {
                state: std::mem::replace(&mut slot.obs, next.clone()),
                action,
                reward: out.reward,
                next_state: next,
                // Episodes only end by time limit, which is not terminal.
                done: false,
                task: slot.task,
            })?;
            if out.done {
                self.record.clamped_actions += slot.env.state().clamped_actions;
                slot.episode += 1;
                slot.obs = slot.env.reset(episode_seed(seed, slot.stream, slot.episode));
                // The counter carries over resets; count it once.
                self.record.clamped_actions -= slot.env.state().clamped_actions;
            }
            self.env_steps += 1;
            self.pending += 1;
        }
        Ok(())
    }

    fn ready(&self) -> bool {
        self.env_steps >= self.config.exploration_steps && self.active.iter().all(|&t| self.buffer.task_len(t) > 0)
    }

    /// Samples a balanced batch and performs one update.
    pub fn update(&mut self) -> Result<UpdateOutcome> {
        let batches = self
            .buffer
            .sample_balanced(&self.active, self.config.batch_size, &mut self.rng)?;
        let act_dim = self.agent.config().act_dim;
        let noise: Vec<PolicyNoise> = batches
            .iter()
            .map(|b| PolicyNoise::sample(&mut self.rng, b.len(), act_dim))
            .collect();
        self.update_with(&batches, &noise)
    }

    /// Update from given sub-batches (one per active task, in order).
    ///
    /// Losses are computed for every task; maskout (unless vanilla) removes
    /// tasks with `J > ε` from the `Φ` step and from their own `w` step;
    /// w-reset (paco only) then replaces each masked task's vector.
    pub fn update_with(&mut self, batches: &[TaskBatch], noise: &[PolicyNoise]) -> Result<UpdateOutcome> {
        if batches.len() != self.active.len() || noise.len() != batches.len() {
            return Err(Error::dim("update batches", &[self.active.len()], &[batches.len(), noise.len()]));
        }
        let update = self.updates;
        let eps = self.config.epsilon;
        let variant = self.config.variant;
        let injections: Vec<_> = self
            .config
            .injections
            .iter()
            .filter(|i| i.update == update)
            .copied()
            .collect();
        for inj in injections.iter().filter(|i| i.kind == InjectionKind::WBlowup) {
            self.agent.scale_w(inj.task, inj.magnitude)?;
        }

        let mut losses = Vec::with_capacity(batches.len());
        for (b, nz) in batches.iter().zip(noise) {
            if !self.active.contains(&b.task) {
                return Err(Error::TaskId {
                    task: b.task,
                    count: self.agent.tasks(),
                });
            }
            let mut loss = self.agent.task_loss(b, nz)?;
            for inj in injections.iter().filter(|i| i.kind == InjectionKind::LossSpike && i.task == b.task) {
                loss.spike(inj.magnitude * eps);
            }
            losses.push(loss);
        }

        let values: Vec<f64> = losses.iter().map(|l| l.total).collect();
        let report = maskout(&values, eps)?;
        let included: Vec<usize> = if variant.masks() {
            report.valid.clone()
        } else {
            (0..losses.len()).collect()
        };

        for &i in &report.valid {
            let l = &losses[i];
            if l.total == f64::NEG_INFINITY || (!exceeds(l.total, eps) && !l.is_finite() && variant.masks()) {
                let dump = self.failure_dump(update, l);
                return Err(Error::Numerics(format!(
                    "non-finite values in unmasked loss of task {} at update {update} (J = {}): {dump}",
                    l.task, l.total
                )));
            }
        }

        let selected: Vec<&TaskLoss> = included.iter().map(|&i| &losses[i]).collect();
        let phi_grad = self.agent.phi_gradient(selected.iter().copied());
        let shared_grad = self.agent.shared_gradient(selected.iter().copied());
        if !selected.is_empty() {
            self.agent.step_task_agnostic(&phi_grad, &shared_grad)?;
        }
        for l in &selected {
            self.agent.step_w(l.task, &l.w_grad)?;
        }
        for l in &selected {
            if l.entropy.is_finite() {
                self.agent.update_temperature(l.task, l.entropy)?;
            }
        }

        let mut resets = Vec::new();
        if variant.masks() {
            for &i in &report.masked {
                self.record.masks.push(MaskEvent {
                    update,
                    env_step: self.env_steps,
                    task: losses[i].task,
                    loss: losses[i].total,
                });
            }
        }
        if variant.resets() {
            let valid_tasks: Vec<usize> = report.valid.iter().map(|&i| losses[i].task).collect();
            for &i in &report.masked {
                let eta = losses[i].task;
                match w_reset(self.agent.w().vectors(), &valid_tasks, eta, &mut self.rng)? {
                    Some((beta, new_w)) => {
                        self.agent.reset_w(eta, new_w.clone())?;
                        let event = ResetEvent {
                            update,
                            env_step: self.env_steps,
                            task: eta,
                            valid: valid_tasks.clone(),
                            beta,
                            new_w,
                        };
                        self.record.resets.push(event.clone());
                        resets.push(event);
                    }
                    None => self.record.skipped_resets.push((update, eta)),
                }
            }
        }
        self.agent.update_targets();
        self.refresh_policies()?;

        let masked_tasks: Vec<usize> = report.masked.iter().map(|&i| losses[i].task).collect();
        let row = LossRow {
            update,
            env_step: self.env_steps,
            losses: values,
            masked: if variant.masks() { masked_tasks } else { Vec::new() },
        };
        let eventful = !row.masked.is_empty() || !resets.is_empty();
        if update % self.config.log_interval == 0 || eventful {
            self.write_loss_row(&row, &resets)?;
            self.record.loss_rows.push(row);
        }
        self.updates += 1;
        Ok(UpdateOutcome {
            update,
            report,
            losses,
            included: included.iter().map(|&i| batches[i].task).collect(),
            phi_grad,
            shared_grad,
            resets,
        })
    }

    fn failure_dump(&self, update: u64, l: &TaskLoss) -> String {
        let bad = |v: &[f64]| v.iter().filter(|x| !x.is_finite()).count();
        let dump = serde_json::json!({
            "update": update,
            "env_step": self.env_steps,
            "task": l.task,
            "total": format!("{}", l.total),
            "actor_loss": format!("{}", l.actor_loss),
            "critic_loss": format!("{}", l.critic_loss),
            "entropy": format!("{}", l.entropy),
            "non_finite_theta_grad": bad(&l.theta_grad),
            "non_finite_shared_grad": bad(&l.shared_grad),
            "non_finite_w_grad": bad(&l.w_grad),
            "w": self.agent.w().raw(l.task),
            "log_alpha": self.agent.log_alpha()[l.task],
        });
        let text = dump.to_string();
        if let Some(w) = &self.writer {
            let path = w.dir().join(format!("failure-update-{update}.json"));
            if std::fs::write(&path, &text).is_ok() {
                return format!("diagnostics written to {}", path.display());
            }
        }
        text
    }

    fn write_loss_row(&mut self, row: &LossRow, resets: &[ResetEvent]) -> Result<()> {
        let n = self.active.len();
        if let Some(w) = self.writer.as_mut() {
            let mut f = vec!["train".to_string(), row.env_step.to_string(), row.update.to_string()];
            f.extend(row.losses.iter().map(|l| format!("{l:e}")));
            f.extend((0..n).map(|_| String::new()));
            f.push(String::new());
            f.push(join_ids(&row.masked));
            let reset_ids: Vec<usize> = resets.iter().map(|r| r.task).collect();
            f.push(join_ids(&reset_ids));
            w.row(f)?;
        }
        Ok(())
    }

    /// Deterministic evaluation of every active task.
    pub fn evaluate_now(&mut self) -> Result<EvalResult> {
        let seed = episode_seed(self.config.seed, EVAL_STREAM, self.evals_done);
        self.evals_done += 1;
        let per_task = self
            .active
            .iter()
            .map(|&t| evaluate_task(&self.agent, t, &self.specs[t], self.config.eval_episodes, seed))
            .collect::<Result<Vec<_>>>()?;
        let mean = per_task.iter().sum::<f64>() / per_task.len() as f64;
        let result = EvalResult { per_task, mean, seed };
        if let Some(w) = self.writer.as_mut() {
            let n = self.active.len();
            let mut f = vec!["eval".to_string(), self.env_steps.to_string(), self.updates.to_string()];
            f.extend((0..n).map(|_| String::new()));
            f.extend(result.per_task.iter().map(|s| format!("{s}")));
            f.push(format!("{}", result.mean));
            f.push(String::new());
            f.push(String::new());
            w.row(f)?;
        }
        self.record.evals.push(EvalRecord {
            update: self.updates,
            env_step: self.env_steps,
            result: result.clone(),
        });
        if self.keep_best && self.best.as_ref().is_none_or(|b| mean > b.mean) {
            let tasks = self
                .active
                .iter()
                .map(|&t| (t, self.agent.w().raw(t).to_vec(), self.agent.log_alpha()[t]))
                .collect();
            self.best = Some(BestSnapshot {
                mean,
                env_step: self.env_steps,
                tasks,
            });
        }
        Ok(result)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            agent: self.agent.clone(),
            specs: self.specs.clone(),
            run: self.run.clone(),
            env_steps: self.env_steps,
            updates: self.updates,
        }
    }

    fn write_checkpoint(&self, name: &str) -> Result<()> {
        if let Some(w) = &self.writer {
            self.checkpoint().save(&w.dir().join("checkpoints").join(name))?;
        }
        Ok(())
    }

    /// Collects the exploration phase, then gives `task` the candidate
    /// `(w, log α)` with the lowest loss on one batch of that data.
    /// Returns the index of the chosen candidate.
    pub fn select_initial_w(&mut self, task: usize, candidates: &[(Vec<f64>, f64)], rows: usize) -> Result<usize> {
        if candidates.is_empty() {
            return Err(Error::Config("no initial w candidates".into()));
        }
        while self.env_steps < self.config.exploration_steps || self.buffer.task_len(task) == 0 {
            self.collect_step()?;
        }
        self.pending %= self.config.env_steps_per_update;
        let batch = self.buffer.sample_task(task, rows, &mut self.rng)?;
        let noise = PolicyNoise::sample(&mut self.rng, rows, self.agent.config().act_dim);
        let mut best = (0, f64::INFINITY);
        for (i, (w, log_alpha)) in candidates.iter().enumerate() {
            let mut probe = self.agent.clone();
            probe.reset_w(task, w.clone())?;
            probe.set_log_alpha(task, *log_alpha)?;
            let j = probe.task_loss(&batch, &noise)?.total;
            if j < best.1 {
                best = (i, j);
            }
        }
        let (w, log_alpha) = &candidates[best.0];
        self.agent.reset_w(task, w.clone())?;
        self.agent.set_log_alpha(task, *log_alpha)?;
        self.refresh_policies()?;
        Ok(best.0)
    }

    /// Runs until `total_env_steps` have been collected.
    pub fn run(&mut self) -> Result<&TrainRecord> {
        let start = Instant::now();
        let total = self.config.total_env_steps;
        while self.env_steps < total {
            self.collect_step()?;
            while self.pending >= self.config.env_steps_per_update {
                self.pending -= self.config.env_steps_per_update;
                if self.ready() {
                    self.update()?;
                }
            }
            if self.config.eval_interval > 0 && self.env_steps >= self.next_eval {
                self.next_eval += self.config.eval_interval;
                self.evaluate_now()?;
            }
            if self.config.checkpoint_interval > 0 && self.env_steps >= self.next_checkpoint {
                self.next_checkpoint += self.config.checkpoint_interval;
                self.write_checkpoint(&format!("step-{:010}.ckpt", self.env_steps))?;
            }
        }
        if self.record.evals.last().is_none_or(|e| e.env_step != self.env_steps) {
            self.evaluate_now()?;
        }
        if let Some(best) = self.best.take() {
            if best.env_step != self.env_steps {
                for (t, w, log_alpha) in best.tasks {
                    self.agent.reset_w(t, w)?;
                    self.agent.set_log_alpha(t, log_alpha)?;
                }
                self.refresh_policies()?;
                self.record.restored_best = Some(best.env_step);
            }
        }
        for slot in &self.envs {
            self.record.clamped_actions += slot.env.state().clamped_actions;
        }
        self.record.wall_clock_secs += start.elapsed().as_secs_f64();
        self.write_checkpoint("final.ckpt")?;
        self.write_metadata()?;
        if let Some(w) = self.writer.as_mut() {
            w.flush()?;
        }
        Ok(&self.record)
    }

    fn write_metadata(&self) -> Result<()> {
        let Some(w) = &self.writer else {
            return Ok(());
        };
        let meta = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.config.seed,
            "run_config": self.run,
            "train_config": self.config,
            "tasks": self.record.task_names,
            "env_steps": self.env_steps,
            "updates": self.updates,
            "eval_policy": "deterministic",
            "eval_seeds": self.record.evals.iter().map(|e| e.result.seed).collect::<Vec<_>>(),
            "mask_events": self.record.masks.len(),
            "reset_events": self.record.resets,
            "skipped_resets": self.record.skipped_resets,
            "clamped_actions": self.record.clamped_actions,
            "restored_best_eval_step": self.record.restored_best,
            "wall_clock_secs": self.record.wall_clock_secs,
        });
        let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(w.dir().join("metadata.json"), text)?;
        Ok(())
    }
}

/// Trains a fresh agent on the configured suite.
pub fn train(run: &RunConfig, out_dir: Option<&Path>) -> Result<(TrainRecord, SacAgent)> {
    let mut trainer = Trainer::new(run)?;
    if let Some(dir) = out_dir {
        trainer.write_to(dir)?;
    }
    trainer.run()?;
    let record = trainer.record().clone();
    Ok((record, trainer.into_agent()))
}

#[derive(Clone, Debug)]
pub struct TransferOutcome {
    pub agent: SacAgent,
    pub task: usize,
    /// Index of the starting `w`: an existing task, or `tasks` for the random draw.
    pub initial_candidate: usize,
    pub record: TrainRecord,
    pub success: f64,
}

/// Learns a compositional vector for `spec` with `Φ` frozen.
///
/// The new `w` starts from whichever of the existing task vectors or a random
/// draw has the lowest loss on exploration data. Only the new task's `w`
/// trains, without maskout or reset, and the run ends with the `w` of its
/// best evaluation.
/// Fails if `Φ` or any pre-existing `w` changed.
pub fn transfer(
    mut agent: SacAgent,
    mut specs: Vec<TaskSpec>,
    spec: TaskSpec,
    config: TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TransferOutcome> {
    let phi_before = agent.phi().as_flat().to_vec();
    let shared_before = agent.shared().to_vec();
    let w_before = agent.w().vectors().to_vec();
    let (k, normalize) = (agent.config().k, agent.config().normalize_w);
    let init = init_w(1, k, WInit::Random, config.seed ^ 0x7a5f, normalize)?;
    let mean_log_alpha = agent.log_alpha().iter().sum::<f64>() / agent.tasks() as f64;
    let mut candidates: Vec<(Vec<f64>, f64)> = w_before.iter().cloned().zip(agent.log_alpha().iter().copied()).collect();
    candidates.push((init.raw(0).to_vec(), mean_log_alpha));
    agent.freeze_phi();
    let task = agent.add_task(init.raw(0).to_vec())?;
    let config = TrainConfig {
        variant: Variant::Vanilla,
        ..config
    };
    specs.push(spec);
    let mut trainer = Trainer::with_agent(agent, specs, vec![task], config)?;
    if let Some(dir) = out_dir {
        trainer.write_to(dir)?;
    }
    let chosen = trainer.select_initial_w(task, &candidates, TRANSFER_PROBE_ROWS)?;
    trainer.keep_best_w();
    trainer.run()?;
    let record = trainer.record().clone();
    let agent = trainer.into_agent();
    let same_bits = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    if !same_bits(agent.phi().as_flat(), &phi_before) || !same_bits(agent.shared(), &shared_before) {
        return Err(Error::Contract("transfer modified the frozen parameter set".into()));
    }
    for (t, w) in w_before.iter().enumerate() {
        if !same_bits(agent.w().raw(t), w) {
            return Err(Error::Contract(format!("transfer modified w of task {t}")));
        }
    }
    let success = record.selected_eval().map_or(0.0, |e| e.mean);
    Ok(TransferOutcome {
        agent,
        task,
        initial_candidate: chosen,
        record,
        success,
    })
}
