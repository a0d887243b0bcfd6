use rand::Rng;

use crate::diff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Terminal for bootstrapping purposes (time-limit truncation is not terminal).
    pub done: bool,
    pub task: usize,
}

/// A sub-batch drawn for one task.
#[derive(Clone, Debug)]
pub struct TaskBatch {
    pub task: usize,
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
    pub dones: Vec<f64>,
    /// Task tag of every sampled row.
    pub task_ids: Vec<usize>,
}

impl TaskBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Ring buffer shared by all tasks, with a per-task index for balanced sampling.
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    task_ids: Vec<usize>,
    head: usize,
    len: usize,
    by_task: Vec<Vec<usize>>,
    /// Position of each slot inside its task's index list.
    pos_in_task: Vec<usize>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize, tasks: usize) -> Self {
        ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            task_ids: Vec::new(),
            head: 0,
            len: 0,
            by_task: vec![Vec::new(); tasks],
            pos_in_task: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn task_len(&self, task: usize) -> usize {
        self.by_task.get(task).map_or(0, Vec::len)
    }

    pub fn tasks(&self) -> usize {
        self.by_task.len()
    }

    /// Grows the task index, e.g. when a transfer task is appended.
    pub fn add_task(&mut self) -> usize {
        self.by_task.push(Vec::new());
        self.by_task.len() - 1
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.task >= self.by_task.len() {
            return Err(Error::TaskId {
                task: t.task,
                count: self.by_task.len(),
            });
        }
        if t.state.len() != self.obs_dim || t.next_state.len() != self.obs_dim {
            return Err(Error::dim("replay state", &[self.obs_dim], &[t.state.len(), t.next_state.len()]));
        }
        if t.action.len() != self.act_dim {
            return Err(Error::dim("replay action", &[self.act_dim], &[t.action.len()]));
        }
        if self.capacity == 0 {
            return Ok(());
        }

        let slot = if self.len < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.dones.push(t.done);
            self.task_ids.push(t.task);
            self.pos_in_task.push(0);
            self.len += 1;
            self.len - 1
        } else {
            let slot = self.head;
            self.unindex(slot);
            let (o, a) = (self.obs_dim, self.act_dim);
            self.states[slot * o..(slot + 1) * o].copy_from_slice(&t.state);
            self.actions[slot * a..(slot + 1) * a].copy_from_slice(&t.action);
            self.rewards[slot] = t.reward;
            self.next_states[slot * o..(slot + 1) * o].copy_from_slice(&t.next_state);
            self.dones[slot] = t.done;
            self.task_ids[slot] = t.task;
            slot
        };
        self.head = (slot + 1) % self.capacity;
        self.pos_in_task[slot] = self.by_task[t.task].len();
        self.by_task[t.task].push(slot);
        Ok(())
    }

    fn unindex(&mut self, slot: usize) {
        let task = self.task_ids[slot];
        let pos = self.pos_in_task[slot];
        let list = &mut self.by_task[task];
        list.swap_remove(pos);
        if pos < list.len() {
            let moved = list[pos];
            self.pos_in_task[moved] = pos;
        }
    }

    /// Uniform sample (with replacement) of `count` transitions tagged `task`.
    pub fn sample_task<R: Rng + ?Sized>(&self, task: usize, count: usize, rng: &mut R) -> Result<TaskBatch> {
        let list = self.by_task.get(task).ok_or(Error::TaskId {
            task,
            count: self.by_task.len(),
        })?;
        if list.is_empty() || count == 0 {
            return Err(Error::Sampling(format!("no transitions available for task {task}")));
        }
        let (o, a) = (self.obs_dim, self.act_dim);
        let mut states = Vec::with_capacity(count * o);
        let mut actions = Vec::with_capacity(count * a);
        let mut rewards = Vec::with_capacity(count);
        let mut next_states = Vec::with_capacity(count * o);
        let mut dones = Vec::with_capacity(count);
        let mut task_ids = Vec::with_capacity(count);
        for _ in 0..count {
            let slot = list[rng.random_range(0..list.len())];
            states.extend_from_slice(&self.states[slot * o..(slot + 1) * o]);
            actions.extend_from_slice(&self.actions[slot * a..(slot + 1) * a]);
            rewards.push(self.rewards[slot]);
            next_states.extend_from_slice(&self.next_states[slot * o..(slot + 1) * o]);
            dones.push(if self.dones[slot] { 1.0 } else { 0.0 });
            task_ids.push(self.task_ids[slot]);
        }
        Ok(TaskBatch {
            task,
            states: Tensor::matrix(count, o, states)?,
            actions: Tensor::matrix(count, a, actions)?,
            rewards,
            next_states: Tensor::matrix(count, o, next_states)?,
            dones,
            task_ids,
        })
    }

    /// Equal-sized sub-batches for `tasks`; `batch_size` must split evenly.
    pub fn sample_balanced<R: Rng + ?Sized>(&self, tasks: &[usize], batch_size: usize, rng: &mut R) -> Result<Vec<TaskBatch>> {
        if tasks.is_empty() || batch_size % tasks.len() != 0 {
            return Err(Error::Sampling(format!(
                "batch size {batch_size} does not split evenly over {} tasks",
                tasks.len()
            )));
        }
        let per_task = batch_size / tasks.len();
        tasks.iter().map(|&t| self.sample_task(t, per_task, rng)).collect()
    }
}
