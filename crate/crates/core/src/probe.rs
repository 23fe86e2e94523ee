//! Critic bias probe: mean critic-1 estimate over states visited by the
//! deterministic policy, against Monte Carlo discounted returns of the same
//! policy from the same states.
//!
//! Probe rollouts run on their own environments with the step limit lifted,
//! draw from their own seed, and never touch the replay buffer, so probing
//! leaves training bit-for-bit unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{Agent, Policy, Trainer};
use crate::envs::{Env, EnvKind};
use crate::error::{Error, Result};

/// Which states the true return is measured from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReturnBasis {
    /// Every visited pair gets its own `horizon`-step return, matching the
    /// pairs the critic is averaged over.
    VisitedPairs,
    /// Only each trajectory's start state.
    TrajectoryStarts,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    pub trajectory_count: usize,
    pub transitions_per_trajectory: usize,
    pub horizon: usize,
    pub basis: ReturnBasis,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            trajectory_count: 50,
            transitions_per_trajectory: 1_000,
            horizon: 1_000,
            basis: ReturnBasis::VisitedPairs,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeTrajectory {
    pub reset_seed: u64,
    /// Row-major visited states.
    pub states: Vec<f64>,
    /// `pi(s)` for each visited state.
    pub actions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSet {
    pub env: EnvKind,
    pub state_dim: usize,
    pub action_dim: usize,
    pub transitions_per_trajectory: usize,
    pub trajectories: Vec<ProbeTrajectory>,
}

impl ProbeSet {
    /// Number of recorded `(state, action)` pairs.
    pub fn len(&self) -> usize {
        self.trajectories.iter().map(|t| t.actions.len() / self.action_dim).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasRecord {
    pub env_step: u64,
    pub mean_estimated_q: f64,
    pub std_estimated_q: f64,
    pub mean_true_return: f64,
    pub std_true_return: f64,
    pub trajectory_count: usize,
    pub transitions_per_trajectory: usize,
}

impl BiasRecord {
    pub fn bias(&self) -> f64 {
        self.mean_estimated_q - self.mean_true_return
    }
}

/// Steps every environment in lockstep under `policy`; after step `t`,
/// `visit(t, next_obs, actions, rewards)` sees the whole batch.
fn lockstep_rollout<P, F>(
    policy: &P,
    envs: &mut [Env],
    start_obs: Vec<Vec<f64>>,
    steps: usize,
    mut visit: F,
) -> Result<()>
where
    P: Policy + ?Sized,
    F: FnMut(usize, &[f64], &[f64], &[f64]),
{
    let state_dim = envs[0].spec().state_dim;
    let action_dim = envs[0].spec().action_dim;
    let n = envs.len();
    let mut obs: Vec<f64> = start_obs.concat();
    let mut rewards = vec![0.0; n];
    for t in 0..steps {
        let actions = policy.act_batch(&obs, n)?;
        for (i, env) in envs.iter_mut().enumerate() {
            let step = env.step(&actions[i * action_dim..(i + 1) * action_dim])?;
            if step.done {
                return Err(Error::Unsupported(
                    "probe rollouts assume environments without terminal states".into(),
                ));
            }
            rewards[i] = step.reward;
            obs[i * state_dim..(i + 1) * state_dim].copy_from_slice(&step.observation);
        }
        visit(t, &obs, &actions, &rewards);
    }
    Ok(())
}

fn fresh_envs(env: EnvKind, seeds: &[u64]) -> (Vec<Env>, Vec<Vec<f64>>) {
    seeds
        .iter()
        .map(|&s| {
            let mut e = Env::new(env);
            e.lift_step_limit();
            let obs = e.reset(s);
            (e, obs)
        })
        .unzip()
}

/// Rolls out the deterministic policy from `trajectory_count` fresh resets
/// and records every visited `(s, pi(s))`.
pub fn collect_probe_set<P: Policy + ?Sized>(
    policy: &P,
    env: EnvKind,
    trajectory_count: usize,
    transitions_per_trajectory: usize,
    rng_seed: u64,
) -> Result<ProbeSet> {
    if trajectory_count == 0 || transitions_per_trajectory == 0 {
        return Err(Error::InvalidArgument("probe set needs at least one pair".into()));
    }
    let spec = env.spec();
    let mut seed_rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<u64> = (0..trajectory_count).map(|_| seed_rng.random()).collect();
    let (mut envs, start_obs) = fresh_envs(env, &seeds);
    let mut trajectories: Vec<ProbeTrajectory> = seeds
        .iter()
        .zip(&start_obs)
        .map(|(&reset_seed, obs)| ProbeTrajectory {
            reset_seed,
            states: {
                let mut v = Vec::with_capacity(transitions_per_trajectory * spec.state_dim);
                v.extend_from_slice(obs);
                v
            },
            actions: Vec::with_capacity(transitions_per_trajectory * spec.action_dim),
        })
        .collect();
    let (sd, ad) = (spec.state_dim, spec.action_dim);
    lockstep_rollout(policy, &mut envs, start_obs, transitions_per_trajectory, |t, next_obs, actions, _| {
        for (i, traj) in trajectories.iter_mut().enumerate() {
            traj.actions.extend_from_slice(&actions[i * ad..(i + 1) * ad]);
            if t + 1 < transitions_per_trajectory {
                traj.states.extend_from_slice(&next_obs[i * sd..(i + 1) * sd]);
            }
        }
    })?;
    Ok(ProbeSet {
        env,
        state_dim: sd,
        action_dim: ad,
        transitions_per_trajectory,
        trajectories,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and (population) std of critic-1 values over every probe pair.
pub fn mean_estimated_q(agent: &Agent, probe: &ProbeSet) -> Result<(f64, f64)> {
    if probe.is_empty() {
        return Err(Error::InvalidArgument("empty probe set".into()));
    }
    let mut values = Vec::with_capacity(probe.len());
    for traj in &probe.trajectories {
        values.extend(agent.q_values(&traj.states, &traj.actions)?);
    }
    Ok(mean_std(&values))
}

/// `G_t = sum_{k<horizon} gamma^k r_{t+k}` for `t < count`; `rewards` must
/// hold at least `count + horizon - 1` entries.
pub fn windowed_discounted_returns(rewards: &[f64], gamma: f64, horizon: usize, count: usize) -> Vec<f64> {
    assert!(rewards.len() + 1 >= count + horizon, "reward sequence too short");
    // Tail sums S_t = r_t + gamma S_{t+1}; a window is S_t - gamma^H S_{t+H}.
    let len = count + horizon - 1;
    let mut tail = vec![0.0; len + 1];
    for t in (0..len).rev() {
        tail[t] = rewards[t] + gamma * tail[t + 1];
    }
    let gamma_h = gamma.powi(horizon as i32);
    (0..count)
        .map(|t| tail[t] - gamma_h * tail[(t + horizon).min(len)])
        .collect()
}

/// Mean and std of Monte Carlo discounted returns of `policy` over the probe
/// states, each truncated after `horizon` steps. Requires
/// `gamma^horizon < 1e-3`, which bounds the truncation error by
/// `max|r| * gamma^horizon / (1 - gamma)`.
pub fn mean_true_return<P: Policy + ?Sized>(
    policy: &P,
    probe: &ProbeSet,
    gamma: f64,
    horizon: usize,
    basis: ReturnBasis,
) -> Result<(f64, f64)> {
    if probe.is_empty() {
        return Err(Error::InvalidArgument("empty probe set".into()));
    }
    if !(gamma.powi(horizon as i32) < 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} too short for gamma {gamma}: gamma^horizon must be < 1e-3"
        )));
    }
    let pairs = match basis {
        ReturnBasis::VisitedPairs => probe.transitions_per_trajectory,
        ReturnBasis::TrajectoryStarts => 1,
    };
    let steps = pairs + horizon - 1;
    let seeds: Vec<u64> = probe.trajectories.iter().map(|t| t.reset_seed).collect();
    let (mut envs, start_obs) = fresh_envs(probe.env, &seeds);
    let mut rewards = vec![Vec::with_capacity(steps); envs.len()];
    lockstep_rollout(policy, &mut envs, start_obs, steps, |_, _, _, r| {
        for (seq, r) in rewards.iter_mut().zip(r) {
            seq.push(*r);
        }
    })?;
    let returns: Vec<f64> = rewards
        .iter()
        .flat_map(|seq| windowed_discounted_returns(seq, gamma, horizon, pairs))
        .collect();
    Ok(mean_std(&returns))
}

/// One full probe of the current agent.
pub fn probe_agent(agent: &Agent, env: EnvKind, config: &ProbeConfig, env_step: u64, rng_seed: u64) -> Result<BiasRecord> {
    let set = collect_probe_set(
        agent,
        env,
        config.trajectory_count,
        config.transitions_per_trajectory,
        rng_seed,
    )?;
    let (mean_q, std_q) = mean_estimated_q(agent, &set)?;
    let (mean_g, std_g) = mean_true_return(agent, &set, agent.config().gamma, config.horizon, config.basis)?;
    Ok(BiasRecord {
        env_step,
        mean_estimated_q: mean_q,
        std_estimated_q: std_q,
        mean_true_return: mean_g,
        std_true_return: std_g,
        trajectory_count: config.trajectory_count,
        transitions_per_trajectory: config.transitions_per_trajectory,
    })
}

/// Trains for `total_steps`, probing before the first step and after every
/// `probe_every` steps. Every probe uses `rng_seed`, so records differ only
/// through the agent.
pub fn bias_schedule(
    trainer: &mut Trainer,
    total_steps: u64,
    probe_every: u64,
    config: &ProbeConfig,
    rng_seed: u64,
) -> Result<Vec<BiasRecord>> {
    if probe_every == 0 {
        return Err(Error::InvalidArgument("probe_every must be >= 1".into()));
    }
    let env = trainer.env_kind();
    let mut records = vec![probe_agent(trainer.agent(), env, config, 0, rng_seed)?];
    for step in 1..=total_steps {
        trainer.train_step()?;
        if step % probe_every == 0 {
            records.push(probe_agent(trainer.agent(), env, config, step, rng_seed)?);
        }
    }
    Ok(records)
}
