//! Multi-task training loop with loss maskout and w-reset.

mod config;
mod eval;
mod reset;
mod train;

pub use config::{mode_select, AgentSettings, Injection, InjectionKind, RunConfig, TrainConfig, Variant};
pub use eval::{evaluate, evaluate_controller, evaluate_task, rollout_summary, Controller, EvalResult, RolloutSummary, Scripted};
pub use reset::{
    convex_combination, exceeds, maskout, sample_simplex, sample_simplex_exponential, w_reset, LossReport, ResetEvent,
};
pub use train::{
    train, transfer, EvalRecord, LossRow, MaskEvent, RunWriter, TrainRecord, Trainer, TransferOutcome, UpdateOutcome,
};
