use rand::Rng;

use crate::agents::agent::{Agent, UpdateDiagnostics};
use crate::agents::config::AgentConfig;
use crate::envs::{Env, EnvKind};
use crate::error::Result;
use crate::replay::{ReplayBuffer, Transition};
use crate::rng::{self, RunRng};

#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// Environment steps taken so far, including this one.
    pub env_step: u64,
    pub reward: f64,
    /// Undiscounted return of the episode this step finished, if any.
    pub finished_episode_return: Option<f64>,
    pub update: Option<UpdateDiagnostics>,
}

/// One training run: agent, environment, replay buffer and the run's
/// training and environment random streams.
#[derive(Clone, Debug)]
pub struct Trainer {
    agent: Agent,
    env: Env,
    buffer: ReplayBuffer,
    rng: RunRng,
    env_rng: RunRng,
    obs: Vec<f64>,
    episode_return: f64,
}

impl Trainer {
    pub fn new(env_kind: EnvKind, config: AgentConfig, run_seed: u64) -> Result<Self> {
        let env = Env::new(env_kind);
        let spec = *env.spec();
        let agent = Agent::new(config, &spec, rng::derive_seed(run_seed, rng::STREAM_INIT))?;
        Self::with_agent(agent, env_kind, run_seed)
    }

    pub fn with_agent(agent: Agent, env_kind: EnvKind, run_seed: u64) -> Result<Self> {
        let mut env = Env::new(env_kind);
        let buffer = ReplayBuffer::new(
            agent.config().replay_capacity,
            agent.state_dim(),
            agent.action_dim(),
        )?;
        let mut env_rng = rng::stream(run_seed, rng::STREAM_ENV);
        let obs = env.reset(env_rng.random());
        Ok(Self {
            agent,
            env,
            buffer,
            rng: rng::stream(run_seed, rng::STREAM_TRAIN),
            env_rng,
            obs,
            episode_return: 0.0,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env_kind(&self) -> EnvKind {
        self.env.kind()
    }

    pub fn into_agent(self) -> Agent {
        self.agent
    }

    /// Act, store the transition, and learn once warmup is over and the
    /// buffer holds a full batch. Resets the environment at episode end.
    pub fn train_step(&mut self) -> Result<StepDiagnostics> {
        let learn = !self.agent.in_warmup();
        let action = self.agent.select_action(&self.obs, true, &mut self.rng)?;
        let step = self.env.step(&action)?;
        let done_mask = if step.done { 1.0 } else { 0.0 };
        self.buffer.push(Transition {
            state: std::mem::take(&mut self.obs),
            action,
            reward: step.reward,
            next_state: step.observation.clone(),
            done_mask,
        })?;
        self.episode_return += step.reward;

        let batch_size = self.agent.config().batch_size;
        let update = if learn && self.buffer.len() >= batch_size {
            let batch = self.buffer.sample(batch_size, &mut self.rng)?;
            Some(self.agent.update(&batch, &mut self.rng)?)
        } else {
            None
        };
        self.agent.record_env_step();

        let finished_episode_return = if step.episode_over() {
            self.obs = self.env.reset(self.env_rng.random());
            Some(std::mem::take(&mut self.episode_return))
        } else {
            self.obs = step.observation;
            None
        };
        Ok(StepDiagnostics {
            env_step: self.agent.env_step_count(),
            reward: step.reward,
            finished_episode_return,
            update,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::config::Variant;

    fn small(variant: Variant) -> AgentConfig {
        AgentConfig {
            warmup_steps: 50,
            batch_size: 16,
            hidden_dim: 8,
            ..AgentConfig::for_variant(variant)
        }
    }

    #[test]
    fn no_update_during_warmup() {
        let mut t = Trainer::new(EnvKind::Pendulum, small(Variant::Wd3), 3).unwrap();
        let before = t.agent().checksum();
        for _ in 0..50 {
            let d = t.train_step().unwrap();
            assert!(d.update.is_none());
        }
        assert_eq!(t.agent().checksum(), before);
        let d = t.train_step().unwrap();
        assert!(d.update.is_some());
        assert_ne!(t.agent().checksum(), before);
    }

    #[test]
    fn actor_changes_on_every_second_update() {
        let mut t = Trainer::new(EnvKind::DoubleIntegrator, small(Variant::Wd3), 1).unwrap();
        for _ in 0..50 {
            t.train_step().unwrap();
        }
        for k in 1..=20u64 {
            let before = t.agent().actor().clone();
            t.train_step().unwrap();
            assert_eq!(t.agent().update_count(), k);
            assert_eq!(t.agent().actor() != &before, k % 2 == 0);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut t = Trainer::new(EnvKind::Reacher, small(Variant::Td3), 42).unwrap();
            (0..150)
                .map(|_| {
                    t.train_step().unwrap();
                    t.agent().checksum()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn episodes_reset_at_horizon() {
        let mut t = Trainer::new(EnvKind::Pendulum, small(Variant::Ddpg), 0).unwrap();
        let mut finished = Vec::new();
        for _ in 0..450 {
            if let Some(r) = t.train_step().unwrap().finished_episode_return {
                finished.push((t.agent().env_step_count(), r));
            }
        }
        let steps: Vec<u64> = finished.iter().map(|(s, _)| *s).collect();
        assert_eq!(steps, vec![200, 400]);
        assert!(finished.iter().all(|(_, r)| *r <= 0.0));
        // Truncation is not termination.
        assert!(t.buffer().iter_oldest_first().all(|tr| tr.done_mask == 0.0));
    }
}
