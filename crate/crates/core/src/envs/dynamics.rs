use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::{Physics, SkillKind, TaskSpec};

/// Offset and width of the physical block: agent xy, agent velocity xy,
/// object xy, object velocity xy.
pub const PHYSICAL_OFFSET: usize = 0;
pub const PHYSICAL_DIM: usize = 8;
pub const GOAL_OFFSET: usize = PHYSICAL_OFFSET + PHYSICAL_DIM;
pub const GOAL_DIM: usize = 2;
pub const SKILL_OFFSET: usize = GOAL_OFFSET + GOAL_DIM;
pub const ACTION_DIM: usize = 2;

pub fn observation_dim(num_skills: usize) -> usize {
    SKILL_OFFSET + num_skills
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteState {
    pub agent: [f64; 2],
    pub agent_vel: [f64; 2],
    pub object: [f64; 2],
    pub object_vel: [f64; 2],
    pub goal: [f64; 2],
    pub skill: Vec<f64>,
    pub t: usize,
    /// Action components that were clamped or replaced because they were
    /// out of range or non-finite.
    pub clamped_actions: u64,
}

impl SuiteState {
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(SKILL_OFFSET + self.skill.len());
        self.write_observation(&mut obs);
        obs
    }

    pub fn write_observation(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.agent);
        out.extend_from_slice(&self.agent_vel);
        out.extend_from_slice(&self.object);
        out.extend_from_slice(&self.object_vel);
        out.extend_from_slice(&self.goal);
        out.extend_from_slice(&self.skill);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// Horizon reached.
    pub done: bool,
    pub success: bool,
}

pub fn reset(spec: &TaskSpec, seed: u64) -> SuiteState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent = spec.agent_init.sample(&mut rng);
    let object = spec.object_init.sample(&mut rng);
    let goal = spec.goal.sample(&mut rng);
    let mut skill = vec![0.0; spec.num_skills];
    skill[spec.skill_id] = 1.0;
    SuiteState {
        agent,
        agent_vel: [0.0; 2],
        object,
        object_vel: [0.0; 2],
        goal,
        skill,
        t: 0,
        clamped_actions: 0,
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn in_slot(y: f64, p: &Physics) -> bool {
    (y - p.slot_center).abs() < p.slot_half_width
}

/// Moves `from` to `to`, cancelling the x motion if the segment crosses
/// `x = 0` outside the slot.
fn wall_move(from: [f64; 2], to: [f64; 2], p: &Physics) -> [f64; 2] {
    let crosses = (from[0] < 0.0) != (to[0] < 0.0);
    if !crosses {
        return to;
    }
    let frac = (0.0 - from[0]) / (to[0] - from[0]);
    let y = from[1] + frac * (to[1] - from[1]);
    if in_slot(y, p) {
        to
    } else {
        [from[0], to[1]]
    }
}

fn clamp_arena(v: [f64; 2], p: &Physics) -> [f64; 2] {
    [v[0].clamp(-p.arena, p.arena), v[1].clamp(-p.arena, p.arena)]
}

/// Shortest route length from `a` to `b` respecting the wall.
pub fn path_distance(a: [f64; 2], b: [f64; 2], p: &Physics) -> f64 {
    if (a[0] < 0.0) == (b[0] < 0.0) {
        return dist(a, b);
    }
    let entry = [0.0, p.slot_center];
    dist(a, entry) + dist(entry, b)
}

pub fn is_success(spec: &TaskSpec, s: &SuiteState) -> bool {
    let r = spec.success_radius;
    match spec.kind {
        SkillKind::Reach | SkillKind::ReachThroughSlot => dist(s.agent, s.goal) < r,
        SkillKind::Push | SkillKind::PushThroughSlot | SkillKind::Slide => dist(s.object, s.goal) < r,
        SkillKind::Toggle => (s.object[0] - s.goal[0]).abs() < r,
    }
}

/// Non-negative distance term whose negative is the reward off-success.
pub fn shaping(spec: &TaskSpec, s: &SuiteState) -> f64 {
    let p = &spec.physics;
    match spec.kind {
        SkillKind::Reach => dist(s.agent, s.goal),
        SkillKind::ReachThroughSlot => path_distance(s.agent, s.goal, p),
        SkillKind::Push | SkillKind::Slide => dist(s.agent, s.object) + dist(s.object, s.goal),
        SkillKind::PushThroughSlot => dist(s.agent, s.object) + path_distance(s.object, s.goal, p),
        SkillKind::Toggle => dist(s.agent, s.object) + (s.object[0] - s.goal[0]).abs(),
    }
}

pub fn reward(spec: &TaskSpec, s: &SuiteState) -> (f64, bool) {
    if is_success(spec, s) {
        (spec.reward.success_bonus, true)
    } else {
        (-spec.reward.distance_coef * shaping(spec, s), false)
    }
}

fn sanitize(action: &[f64], counter: &mut u64) -> [f64; 2] {
    let mut a = [0.0; 2];
    for (i, slot) in a.iter_mut().enumerate() {
        let v = action.get(i).copied().unwrap_or(0.0);
        *slot = if !v.is_finite() {
            *counter += 1;
            0.0
        } else if v.abs() > 1.0 {
            *counter += 1;
            v.clamp(-1.0, 1.0)
        } else {
            v
        };
    }
    a
}

/// Advances one step. Out-of-range actions are clamped and counted.
pub fn step(spec: &TaskSpec, s: &mut SuiteState, action: &[f64]) -> StepOutcome {
    let p = &spec.physics;
    let a = sanitize(action, &mut s.clamped_actions);
    let contact = dist(s.agent, s.object) <= p.contact_radius;

    let mut agent = clamp_arena([s.agent[0] + a[0] * p.max_speed, s.agent[1] + a[1] * p.max_speed], p);
    if spec.kind.has_wall() {
        agent = wall_move(s.agent, agent, p);
    }
    let disp = [agent[0] - s.agent[0], agent[1] - s.agent[1]];
    s.agent = agent;
    s.agent_vel = disp;

    match spec.kind {
        SkillKind::Reach | SkillKind::ReachThroughSlot => {}
        SkillKind::Push | SkillKind::PushThroughSlot => {
            if contact {
                let mut obj = clamp_arena([s.object[0] + disp[0], s.object[1] + disp[1]], p);
                if spec.kind.has_wall() {
                    obj = wall_move(s.object, obj, p);
                }
                s.object_vel = [obj[0] - s.object[0], obj[1] - s.object[1]];
                s.object = obj;
            } else {
                s.object_vel = [0.0; 2];
            }
        }
        SkillKind::Slide => {
            s.object_vel = if contact {
                disp
            } else {
                [s.object_vel[0] * p.friction, s.object_vel[1] * p.friction]
            };
            let moved = [s.object[0] + s.object_vel[0], s.object[1] + s.object_vel[1]];
            let obj = clamp_arena(moved, p);
            for i in 0..2 {
                if obj[i] != moved[i] {
                    s.object_vel[i] = 0.0;
                }
            }
            s.object = obj;
        }
        SkillKind::Toggle => {
            if contact {
                let x = (s.object[0] + disp[0]).clamp(-p.arena, p.arena);
                s.object_vel = [x - s.object[0], 0.0];
                s.object[0] = x;
            } else {
                s.object_vel = [0.0; 2];
            }
        }
    }

    s.t += 1;
    let (reward, success) = reward(spec, s);
    StepOutcome {
        reward,
        done: s.t >= spec.horizon,
        success,
    }
}

/// One environment instance bound to its task.
#[derive(Clone, Debug)]
pub struct TaskEnv {
    spec: TaskSpec,
    state: SuiteState,
}

impl TaskEnv {
    pub fn new(spec: TaskSpec, seed: u64) -> Self {
        let state = reset(&spec, seed);
        TaskEnv { spec, state }
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn state(&self) -> &SuiteState {
        &self.state
    }

    /// Restarts the episode; the diagnostic counter is kept.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let clamped = self.state.clamped_actions;
        self.state = reset(&self.spec, seed);
        self.state.clamped_actions = clamped;
        self.state.observation()
    }

    pub fn step(&mut self, action: &[f64]) -> StepOutcome {
        step(&self.spec, &mut self.state, action)
    }

    pub fn observation(&self) -> Vec<f64> {
        self.state.observation()
    }
}
