//! Deterministic policy gradient agents for continuous control.
//!
//! The crate bundles three agents that share one target kernel and one
//! training loop:
//!
//! * DDPG, a single critic bootstrapped from its own target network;
//! * TD3, clipped double Q-learning over a pair of critics;
//! * WD3, which bootstraps from `beta * min(Q1', Q2') + (1 - beta) * mean(Q1', Q2')`.
//!
//! Around them sit a small fixed-architecture MLP with manual backprop and
//! Adam ([`nn`]), three toy environments with exact dynamics ([`envs`]), a
//! replay ring ([`replay`]), closed-form and Monte Carlo checks of min-operator
//! bias ([`theory`]), a critic bias probe ([`probe`]), and the experiment
//! runner with its CLI ([`runner`]).

pub mod agents;
pub mod envs;
pub mod error;
pub mod nn;
pub mod probe;
pub mod replay;
pub mod rng;
pub mod runner;
pub mod theory;

pub use agents::{Agent, AgentConfig, Policy, Trainer, Variant};
pub use envs::{Env, EnvKind, EnvSpec, StepResult};
pub use error::{Error, Result};
pub use nn::{AdamState, GradBundle, MlpParams, OutputActivation, ParamGrads};
pub use replay::{Batch, ReplayBuffer, Transition};
