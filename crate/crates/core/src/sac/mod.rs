mod agent;
mod networks;
mod replay;

pub use agent::{polyak_update, AgentConfig, PolicyNoise, SacAgent, TaskLoss, TaskPolicy};
pub use networks::{
    mlp_forward, split_actor_output, squashed_sample, standard_normal, Activation, AgentLayout, Net, NetParams,
    NetVars, Slot, LOG_STD_MAX, LOG_STD_MIN,
};
pub use replay::{ReplayBuffer, TaskBatch, Transition};
