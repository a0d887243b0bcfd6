use serde::{Deserialize, Serialize};

use super::dynamics::{observation_dim, TaskEnv, ACTION_DIM};
use super::spec::{GoalMode, GoalSampler, Physics, Region, RewardConfig, SkillKind, TaskSpec, DEFAULT_HORIZON};
use crate::error::{Error, Result};

/// One skill entry of a suite file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillConfig {
    pub name: String,
    pub kind: SkillKind,
    /// One-hot index; defaults to the entry's position.
    #[serde(default)]
    pub skill_id: Option<usize>,
    pub goal_low: [f64; 2],
    pub goal_high: [f64; 2],
    /// Goal used in fixed mode; defaults to the centre of the goal box.
    #[serde(default)]
    pub fixed_goal: Option<[f64; 2]>,
    pub agent_low: [f64; 2],
    pub agent_high: [f64; 2],
    pub object_low: [f64; 2],
    pub object_high: [f64; 2],
    #[serde(default = "default_success_radius")]
    pub success_radius: f64,
}

fn default_success_radius() -> f64 {
    0.1
}

/// Declarative suite definition. With no `skills` the `name` selects a
/// built-in suite (`tri-task` or `deca-task`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub goal_mode: GoalMode,
    pub horizon: usize,
    pub reward: RewardConfig,
    pub physics: Physics,
    pub skills: Vec<SkillConfig>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            name: "tri-task".into(),
            goal_mode: GoalMode::Random,
            horizon: DEFAULT_HORIZON,
            reward: RewardConfig::default(),
            physics: Physics::default(),
            skills: Vec::new(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn skill(
    name: &str,
    kind: SkillKind,
    goal: ([f64; 2], [f64; 2]),
    agent: ([f64; 2], [f64; 2]),
    object: ([f64; 2], [f64; 2]),
) -> SkillConfig {
    SkillConfig {
        name: name.into(),
        kind,
        skill_id: None,
        goal_low: goal.0,
        goal_high: goal.1,
        fixed_goal: None,
        agent_low: agent.0,
        agent_high: agent.1,
        object_low: object.0,
        object_high: object.1,
        success_radius: default_success_radius(),
    }
}

const CENTRE: ([f64; 2], [f64; 2]) = ([-0.3, -0.3], [0.3, 0.3]);
const WIDE: ([f64; 2], [f64; 2]) = ([-0.8, -0.8], [0.8, 0.8]);
const MID: ([f64; 2], [f64; 2]) = ([-0.5, -0.5], [0.5, 0.5]);

pub fn reach_skill() -> SkillConfig {
    skill("reach", SkillKind::Reach, WIDE, CENTRE, MID)
}

pub fn push_skill() -> SkillConfig {
    skill("push", SkillKind::Push, WIDE, CENTRE, MID)
}

pub fn slot_skill() -> SkillConfig {
    skill(
        "push-slot",
        SkillKind::PushThroughSlot,
        ([0.25, -0.6], [0.75, 0.6]),
        ([-0.8, -0.5], [-0.5, 0.5]),
        ([-0.5, -0.4], [-0.25, 0.4]),
    )
}

/// Skill list of a built-in suite.
pub fn builtin_skills(name: &str) -> Result<Vec<SkillConfig>> {
    match name {
        "tri-task" => Ok(vec![reach_skill(), push_skill(), slot_skill()]),
        "deca-task" => Ok(vec![
            reach_skill(),
            skill(
                "reach-slot",
                SkillKind::ReachThroughSlot,
                ([0.3, -0.7], [0.8, 0.7]),
                ([-0.8, -0.6], [-0.3, 0.6]),
                MID,
            ),
            push_skill(),
            slot_skill(),
            skill("slide", SkillKind::Slide, WIDE, CENTRE, ([-0.3, -0.3], [0.3, 0.3])),
            skill(
                "toggle",
                SkillKind::Toggle,
                ([-0.8, -0.5], [0.8, -0.5]),
                ([-0.3, -0.3], [0.3, 0.0]),
                ([-0.3, -0.5], [0.3, -0.5]),
            ),
            skill("reach-corner", SkillKind::Reach, ([0.5, 0.5], [0.9, 0.9]), CENTRE, MID),
            skill(
                "push-back",
                SkillKind::Push,
                ([-0.8, -0.6], [-0.4, 0.6]),
                ([0.0, -0.3], [0.4, 0.3]),
                ([0.1, -0.4], [0.5, 0.4]),
            ),
            skill(
                "toggle-far",
                SkillKind::Toggle,
                ([0.4, 0.5], [0.9, 0.5]),
                ([-0.3, 0.0], [0.3, 0.3]),
                ([-0.3, 0.5], [0.0, 0.5]),
            ),
            skill("slide-far", SkillKind::Slide, ([0.4, -0.8], [0.9, 0.8]), CENTRE, ([-0.2, -0.2], [0.2, 0.2])),
        ]),
        other => Err(Error::Config(format!("unknown suite '{other}' (expected tri-task or deca-task)"))),
    }
}

impl SkillConfig {
    pub fn to_spec(&self, index: usize, num_skills: usize, suite: &SuiteConfig) -> Result<TaskSpec> {
        let goal = match suite.goal_mode {
            GoalMode::Random => GoalSampler::Uniform(Region::new(self.goal_low, self.goal_high)),
            GoalMode::Fixed => GoalSampler::Point(
                self.fixed_goal
                    .unwrap_or_else(|| Region::new(self.goal_low, self.goal_high).center()),
            ),
        };
        let spec = TaskSpec {
            name: self.name.clone(),
            skill_id: self.skill_id.unwrap_or(index),
            num_skills,
            kind: self.kind,
            goal,
            agent_init: Region::new(self.agent_low, self.agent_high),
            object_init: Region::new(self.object_low, self.object_high),
            horizon: suite.horizon,
            success_radius: self.success_radius,
            reward: suite.reward,
            physics: suite.physics,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A list of task specs sharing one observation layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Suite {
    pub name: String,
    pub specs: Vec<TaskSpec>,
}

impl Suite {
    pub fn from_config(config: &SuiteConfig) -> Result<Self> {
        let skills = if config.skills.is_empty() {
            builtin_skills(&config.name)?
        } else {
            config.skills.clone()
        };
        let n = skills.len();
        let specs = skills
            .iter()
            .enumerate()
            .map(|(i, s)| s.to_spec(i, n, config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Suite {
            name: config.name.clone(),
            specs,
        })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        observation_dim(self.specs.first().map_or(0, |s| s.num_skills))
    }

    pub fn act_dim(&self) -> usize {
        ACTION_DIM
    }

    pub fn env(&self, task: usize, seed: u64) -> TaskEnv {
        TaskEnv::new(self.specs[task].clone(), seed)
    }
}

/// Built-in suite by name with the given goal mode.
pub fn build_suite(name: &str, goal_mode: GoalMode) -> Result<Suite> {
    Suite::from_config(&SuiteConfig {
        name: name.into(),
        goal_mode,
        ..SuiteConfig::default()
    })
}

/// Per-episode reset seed derived from a run seed and counters.
pub fn episode_seed(seed: u64, stream: u64, episode: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(episode.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
