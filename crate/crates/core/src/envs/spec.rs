use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkillKind {
    /// Move the agent onto the goal.
    Reach,
    /// Reach a goal on the far side of the wall, through the slot.
    ReachThroughSlot,
    /// Drag the object onto the goal.
    Push,
    /// Drag the object through the slot to a goal beyond the wall.
    PushThroughSlot,
    /// Like push, but the object keeps its velocity, decaying by friction,
    /// once contact is lost.
    Slide,
    /// Slide a rail-bound object along x to the goal's x coordinate.
    Toggle,
}

impl SkillKind {
    pub fn has_wall(self) -> bool {
        matches!(self, SkillKind::ReachThroughSlot | SkillKind::PushThroughSlot)
    }

    pub fn moves_object(self) -> bool {
        !matches!(self, SkillKind::Reach | SkillKind::ReachThroughSlot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GoalMode {
    #[default]
    Random,
    Fixed,
}

impl FromStr for GoalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(GoalMode::Random),
            "fixed" => Ok(GoalMode::Fixed),
            other => Err(Error::Config(format!("unknown goal mode '{other}'"))),
        }
    }
}

/// Axis-aligned box `[low, high]` in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub low: [f64; 2],
    pub high: [f64; 2],
}

impl Region {
    pub fn new(low: [f64; 2], high: [f64; 2]) -> Self {
        Region { low, high }
    }

    pub fn point(p: [f64; 2]) -> Self {
        Region { low: p, high: p }
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.low[0] + self.high[0]), 0.5 * (self.low[1] + self.high[1])]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = if self.low[i] == self.high[i] {
                self.low[i]
            } else {
                rng.random_range(self.low[i]..self.high[i])
            };
        }
        out
    }

    fn validate(&self, what: &str) -> Result<()> {
        for i in 0..2 {
            if !(self.low[i] <= self.high[i]) || !self.low[i].is_finite() || !self.high[i].is_finite() {
                return Err(Error::Config(format!("{what}: low {:?} must not exceed high {:?}", self.low, self.high)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GoalSampler {
    Uniform(Region),
    Point([f64; 2]),
}

impl GoalSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match self {
            GoalSampler::Uniform(r) => r.sample(rng),
            GoalSampler::Point(p) => *p,
        }
    }

    pub fn mean(&self) -> [f64; 2] {
        match self {
            GoalSampler::Uniform(r) => r.center(),
            GoalSampler::Point(p) => *p,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, GoalSampler::Point(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the distance shaping term.
    pub distance_coef: f64,
    /// Reward paid on any step where the success predicate holds.
    pub success_bonus: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            distance_coef: 1.0,
            success_bonus: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    /// Displacement per step at full action.
    pub max_speed: f64,
    /// Agent-object distance below which the object is dragged.
    pub contact_radius: f64,
    /// Half-width of the slot in the wall at `x = 0`.
    pub slot_half_width: f64,
    /// Centre of the slot along y.
    pub slot_center: f64,
    /// Per-step velocity retention of a sliding object.
    pub friction: f64,
    /// Arena half-extent; positions are clamped to `[-arena, arena]`.
    pub arena: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            max_speed: 0.15,
            contact_radius: 0.15,
            slot_half_width: 0.15,
            slot_center: 0.0,
            friction: 0.9,
            arena: 1.0,
        }
    }
}

pub const DEFAULT_HORIZON: usize = 150;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub skill_id: usize,
    pub num_skills: usize,
    pub kind: SkillKind,
    pub goal: GoalSampler,
    pub agent_init: Region,
    pub object_init: Region,
    pub horizon: usize,
    pub success_radius: f64,
    pub reward: RewardConfig,
    pub physics: Physics,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.skill_id >= self.num_skills {
            return Err(Error::Config(format!(
                "skill '{}': id {} outside one-hot width {}",
                self.name, self.skill_id, self.num_skills
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config(format!("skill '{}': horizon must be positive", self.name)));
        }
        if !(self.success_radius > 0.0) {
            return Err(Error::Config(format!("skill '{}': success_radius must be positive", self.name)));
        }
        if let GoalSampler::Uniform(r) = &self.goal {
            r.validate(&format!("skill '{}' goal region", self.name))?;
        }
        self.agent_init.validate(&format!("skill '{}' agent region", self.name))?;
        self.object_init.validate(&format!("skill '{}' object region", self.name))?;
        Ok(())
    }

    /// Copy of this spec whose goal is the sampler mean, held fixed.
    pub fn fixed_goal(&self) -> TaskSpec {
        TaskSpec {
            goal: GoalSampler::Point(self.goal.mean()),
            ..self.clone()
        }
    }
}
