mod controller;
mod dynamics;
mod spec;
mod suite;

pub use controller::scripted_action;
pub use dynamics::{
    is_success, observation_dim, path_distance, reset, reward, shaping, step, StepOutcome, SuiteState, TaskEnv,
    ACTION_DIM, GOAL_DIM, GOAL_OFFSET, PHYSICAL_DIM, PHYSICAL_OFFSET, SKILL_OFFSET,
};
pub use spec::{GoalMode, GoalSampler, Physics, Region, RewardConfig, SkillKind, TaskSpec, DEFAULT_HORIZON};
pub use suite::{
    build_suite, builtin_skills, episode_seed, push_skill, reach_skill, slot_skill, SkillConfig, Suite, SuiteConfig,
};
