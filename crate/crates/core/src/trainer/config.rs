use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compose::{CompositionScope, WInit};
use crate::envs::SuiteConfig;
use crate::error::{Error, Result};
use crate::sac::{Activation, AgentConfig};

/// Which parts of the reset scheme are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Variant {
    /// Loss maskout and w-reset.
    #[default]
    #[serde(rename = "paco")]
    Paco,
    /// Loss maskout only.
    #[serde(rename = "maskout", alias = "maskout-only")]
    MaskoutOnly,
    /// Neither.
    #[serde(rename = "vanilla")]
    Vanilla,
}

impl Variant {
    pub fn masks(self) -> bool {
        !matches!(self, Variant::Vanilla)
    }

    pub fn resets(self) -> bool {
        matches!(self, Variant::Paco)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Paco => "paco",
            Variant::MaskoutOnly => "maskout",
            Variant::Vanilla => "vanilla",
        })
    }
}

/// Parses a variant name.
pub fn mode_select(name: &str) -> Result<Variant> {
    match name {
        "paco" => Ok(Variant::Paco),
        "maskout" | "maskout-only" => Ok(Variant::MaskoutOnly),
        "vanilla" => Ok(Variant::Vanilla),
        other => Err(Error::Config(format!(
            "unknown variant '{other}' (expected paco, maskout or vanilla)"
        ))),
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        mode_select(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionKind {
    /// Rescales `J_η` (and its gradients) so that `J_η = magnitude · ε`.
    LossSpike,
    /// Multiplies the stored `w_η` by `magnitude`, making the task's
    /// parameters, and with them its loss, blow up.
    WBlowup,
}

/// A scheduled fault used to exercise the reset scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    /// Update index (0-based) at which the fault fires.
    pub update: u64,
    pub task: usize,
    pub kind: InjectionKind,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    /// Extreme-loss threshold `ε`.
    pub epsilon: f64,
    /// Total transitions per update, split evenly over the tasks.
    pub batch_size: usize,
    pub parallel_envs: usize,
    pub total_env_steps: u64,
    /// Environment steps taken with uniform random actions before learning.
    pub exploration_steps: u64,
    /// New environment steps per gradient update.
    pub env_steps_per_update: u64,
    pub buffer_capacity: usize,
    /// Environment steps between evaluations; 0 evaluates only at the end.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Environment steps between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
    /// Updates between loss rows in the metrics stream.
    pub log_interval: u64,
    pub seed: u64,
    pub injections: Vec<Injection>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Paco,
            epsilon: 3e3,
            batch_size: 1280,
            parallel_envs: 10,
            total_env_steps: 1_000_000,
            exploration_steps: 1500,
            env_steps_per_update: 10,
            buffer_capacity: 1_000_000,
            eval_interval: 10_000,
            eval_episodes: 10,
            checkpoint_interval: 0,
            log_interval: 100,
            seed: 0,
            injections: Vec::new(),
        }
    }
}

/// Network and optimiser settings; dimensions come from the suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub k: usize,
    pub scope: CompositionScope,
    pub normalize_w: bool,
    pub w_init: WInit,
    pub gamma: f64,
    pub polyak: f64,
    /// Shared learning rate `λ` for `Φ`, `W` and the temperatures.
    pub lr: f64,
    pub actor_lr: Option<f64>,
    pub critic_lr: Option<f64>,
    pub w_lr: Option<f64>,
    pub alpha_lr: Option<f64>,
    pub init_log_alpha: f64,
    pub target_entropy: Option<f64>,
}

impl Default for AgentSettings {
    fn default() -> Self {
        AgentSettings {
            hidden: vec![400, 400, 400],
            activation: Activation::Relu,
            k: 5,
            scope: CompositionScope::AcShared,
            normalize_w: false,
            w_init: WInit::Random,
            gamma: 0.99,
            polyak: 0.005,
            lr: 3e-4,
            actor_lr: None,
            critic_lr: None,
            w_lr: None,
            alpha_lr: None,
            init_log_alpha: 0.0,
            target_entropy: None,
        }
    }
}

impl AgentSettings {
    pub fn agent_config(&self, obs_dim: usize, act_dim: usize, tasks: usize, seed: u64) -> AgentConfig {
        AgentConfig {
            obs_dim,
            act_dim,
            tasks,
            hidden: self.hidden.clone(),
            activation: self.activation,
            k: self.k,
            scope: self.scope,
            normalize_w: self.normalize_w,
            w_init: self.w_init,
            gamma: self.gamma,
            polyak: self.polyak,
            actor_lr: self.actor_lr.unwrap_or(self.lr),
            critic_lr: self.critic_lr.unwrap_or(self.lr),
            w_lr: self.w_lr.unwrap_or(self.lr),
            alpha_lr: self.alpha_lr.unwrap_or(self.lr),
            init_log_alpha: self.init_log_alpha,
            target_entropy: self.target_entropy,
            seed,
        }
    }
}

/// Complete run description: `[suite]`, `[agent]` and `[trainer]` sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suite: SuiteConfig,
    pub agent: AgentSettings,
    pub trainer: TrainConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.trainer;
        let a = &self.agent;
        let field = |name: &str, msg: &str| Err(Error::Config(format!("{name}: {msg}")));
        if !(t.epsilon > 0.0) {
            return field("trainer.epsilon", "must be positive");
        }
        if t.batch_size == 0 {
            return field("trainer.batch_size", "must be positive");
        }
        if t.parallel_envs == 0 {
            return field("trainer.parallel_envs", "must be positive");
        }
        if t.env_steps_per_update == 0 {
            return field("trainer.env_steps_per_update", "must be positive");
        }
        if t.buffer_capacity == 0 {
            return field("trainer.buffer_capacity", "must be positive");
        }
        if t.eval_episodes == 0 {
            return field("trainer.eval_episodes", "must be positive");
        }
        if t.log_interval == 0 {
            return field("trainer.log_interval", "must be positive");
        }
        if a.k == 0 {
            return field("agent.k", "must be at least 1");
        }
        if a.hidden.iter().any(|&h| h == 0) {
            return field("agent.hidden", "layer widths must be positive");
        }
        if !(0.0..=1.0).contains(&a.polyak) {
            return field("agent.polyak", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&a.gamma) {
            return field("agent.gamma", "must lie in [0, 1]");
        }
        for inj in &t.injections {
            if !inj.magnitude.is_finite() {
                return field("trainer.injections", "magnitude must be finite");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_settings() {
        let c = RunConfig::default();
        assert_eq!(c.agent.k, 5);
        assert_eq!(c.trainer.epsilon, 3e3);
        assert_eq!(c.agent.lr, 3e-4);
        assert_eq!(c.agent.gamma, 0.99);
        assert_eq!(c.trainer.batch_size, 1280);
        assert_eq!(c.trainer.parallel_envs, 10);
        assert_eq!(c.trainer.exploration_steps, 1500);
        assert_eq!(c.trainer.buffer_capacity, 1_000_000);
        assert_eq!(c.agent.hidden, vec![400, 400, 400]);
        let ac = c.agent.agent_config(10, 2, 3, 0);
        assert_eq!((ac.actor_lr, ac.critic_lr, ac.w_lr), (3e-4, 3e-4, 3e-4));
    }

    #[test]
    fn variants_parse() {
        assert_eq!(mode_select("paco").unwrap(), Variant::Paco);
        assert_eq!(mode_select("maskout").unwrap(), Variant::MaskoutOnly);
        assert_eq!(mode_select("maskout-only").unwrap(), Variant::MaskoutOnly);
        assert_eq!(mode_select("vanilla").unwrap(), Variant::Vanilla);
        assert!(matches!(mode_select("reset"), Err(Error::Config(_))));
        assert!(Variant::Paco.masks() && Variant::Paco.resets());
        assert!(Variant::MaskoutOnly.masks() && !Variant::MaskoutOnly.resets());
        assert!(!Variant::Vanilla.masks() && !Variant::Vanilla.resets());
    }

    #[test]
    fn toml_round_trip_and_field_errors() {
        let text = r#"
            [suite]
            name = "tri-task"

            [agent]
            hidden = [32, 32]
            k = 2
            normalize_w = true

            [trainer]
            variant = "maskout"
            batch_size = 96

            [[trainer.injections]]
            update = 10
            task = 1
            kind = "loss-spike"
            magnitude = 2.0
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.agent.k, 2);
        assert_eq!(cfg.trainer.variant, Variant::MaskoutOnly);
        assert_eq!(cfg.trainer.injections[0].kind, InjectionKind::LossSpike);
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);

        let err = RunConfig::from_toml_str("[trainer]\nbatch = 3\n").unwrap_err().to_string();
        assert!(err.contains("batch"), "{err}");
        let err = RunConfig::from_toml_str("[trainer]\nepsilon = -1.0\n").unwrap_err().to_string();
        assert!(err.contains("trainer.epsilon"), "{err}");
    }
}
