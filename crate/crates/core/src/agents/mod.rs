//! DDPG, TD3 and WD3 behind one target kernel and one training loop.

pub mod agent;
pub mod config;
pub mod trainer;

pub use agent::{
    actor_objective_and_grads, clipped_gaussian, concat_rows, critic_loss_and_grads,
    weighted_bracket, Agent, Checkpoint, Policy, UpdateDiagnostics,
};
pub use config::{AgentConfig, Variant};
pub use trainer::{StepDiagnostics, Trainer};
