use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::agents::config::{AgentConfig, Variant};
use crate::envs::{EnvKind, EnvSpec};
use crate::error::{check_dim, Error, Result};
use crate::nn::{
    init_params, read_snapshot, soft_update, write_snapshot, AdamState, MlpParams,
    OutputActivation, ParamGrads,
};
use crate::replay::Batch;

/// Anything that maps states to actions deterministically.
pub trait Policy {
    fn act_batch(&self, states: &[f64], n: usize) -> Result<Vec<f64>>;

    fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.act_batch(state, 1)
    }
}

impl Policy for MlpParams {
    fn act_batch(&self, states: &[f64], n: usize) -> Result<Vec<f64>> {
        self.forward_batch(states, n)
    }
}

/// The bootstrap bracket `beta * min(q1, q2) + (1 - beta)/2 * (q1 + q2)`.
///
/// It is a convex combination of the minimum and the mean, so
/// `min <= bracket <= mean` for every `beta` in `[0, 1]`.
pub fn weighted_bracket(q1: f64, q2: f64, beta: f64) -> f64 {
    beta * q1.min(q2) + (1.0 - beta) / 2.0 * (q1 + q2)
}

/// Gaussian sample with standard deviation `std`, clipped to `[-clip, clip]`.
pub fn clipped_gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64, clip: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (std * z).clamp(-clip, clip)
}

/// Row-wise concatenation `[state | action]`.
pub fn concat_rows(states: &[f64], state_dim: usize, actions: &[f64], action_dim: usize) -> Vec<f64> {
    let n = states.len() / state_dim;
    let mut out = Vec::with_capacity(n * (state_dim + action_dim));
    for (s, a) in states.chunks_exact(state_dim).zip(actions.chunks_exact(action_dim)) {
        out.extend_from_slice(s);
        out.extend_from_slice(a);
    }
    out
}

/// Mean-squared error of `critic` against fixed `targets` and its parameter
/// gradient. The targets are constants: nothing flows back into whatever
/// produced them.
pub fn critic_loss_and_grads(
    critic: &MlpParams,
    inputs: &[f64],
    targets: &[f64],
) -> Result<(f64, ParamGrads)> {
    let n = targets.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let trace = critic.forward_trace(inputs, n)?;
    let residuals: Vec<f64> = trace.output.iter().zip(targets).map(|(q, y)| q - y).collect();
    let loss = residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let upstream: Vec<f64> = residuals.iter().map(|r| 2.0 * r / n as f64).collect();
    let grads = critic.backward_trace(&trace, &upstream)?.param_grads;
    Ok((loss, grads))
}

/// `J = mean_i Q(s_i, pi(s_i))` and the gradient of `-J` with respect to the
/// actor parameters, chained through the critic's action input.
pub fn actor_objective_and_grads(
    actor: &MlpParams,
    critic: &MlpParams,
    states: &[f64],
    state_dim: usize,
) -> Result<(f64, ParamGrads)> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = states.len() / state_dim;
    check_dim("actor states", n * state_dim, states.len())?;
    let action_dim = actor.output_dim();
    check_dim("critic input", state_dim + action_dim, critic.input_dim())?;

    let actor_trace = actor.forward_trace(states, n)?;
    let critic_in = concat_rows(states, state_dim, &actor_trace.output, action_dim);
    let critic_trace = critic.forward_trace(&critic_in, n)?;
    let objective = critic_trace.output.iter().sum::<f64>() / n as f64;

    let upstream = vec![1.0 / n as f64; n];
    let dq = critic.backward_trace(&critic_trace, &upstream)?.input_grad;
    let width = state_dim + action_dim;
    let neg_action_grad: Vec<f64> = dq
        .chunks_exact(width)
        .flat_map(|row| row[state_dim..].iter().map(|g| -g))
        .collect();
    let grads = actor.backward_trace(&actor_trace, &neg_action_grad)?.param_grads;
    Ok((objective, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateDiagnostics {
    /// Pre-update loss of each online critic.
    pub critic_losses: Vec<f64>,
    pub mean_target: f64,
    pub beta: f64,
    pub actor_updated: bool,
}

/// Actor, critics, their targets and optimizers.
#[derive(Clone, Debug)]
pub struct Agent {
    config: AgentConfig,
    state_dim: usize,
    action_dim: usize,
    action_bound: f64,
    actor: MlpParams,
    actor_target: MlpParams,
    critics: Vec<MlpParams>,
    critic_targets: Vec<MlpParams>,
    actor_opt: AdamState,
    critic_opts: Vec<AdamState>,
    env_step_count: u64,
    update_count: u64,
    actor_update_count: u64,
}

impl Agent {
    /// Fresh networks seeded from `init_seed`; targets start as exact copies.
    pub fn new(config: AgentConfig, spec: &EnvSpec, init_seed: u64) -> Result<Self> {
        config
            .validate()
            .map_err(|(field, msg)| Error::InvalidArgument(format!("agent.{field} {msg}")))?;
        let mut seeds = ChaCha8Rng::seed_from_u64(init_seed);
        let actor = init_params(
            spec.state_dim,
            config.hidden_dim,
            spec.action_dim,
            OutputActivation::TanhScaled {
                bound: spec.action_bound,
            },
            seeds.random(),
        )?;
        let critics = (0..config.variant.critic_count())
            .map(|_| {
                init_params(
                    spec.state_dim + spec.action_dim,
                    config.hidden_dim,
                    1,
                    OutputActivation::Identity,
                    seeds.random(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_networks(config, spec, actor, critics))
    }

    /// Wraps hand-built networks; targets are copies, optimizers fresh.
    pub fn from_networks(
        config: AgentConfig,
        spec: &EnvSpec,
        actor: MlpParams,
        critics: Vec<MlpParams>,
    ) -> Self {
        let actor_opt = AdamState::new(&actor);
        let critic_opts = critics.iter().map(AdamState::new).collect();
        Self {
            state_dim: spec.state_dim,
            action_dim: spec.action_dim,
            action_bound: spec.action_bound,
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor,
            critics,
            actor_opt,
            critic_opts,
            config,
            env_step_count: 0,
            update_count: 0,
            actor_update_count: 0,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    pub fn actor(&self) -> &MlpParams {
        &self.actor
    }

    pub fn actor_target(&self) -> &MlpParams {
        &self.actor_target
    }

    pub fn critics(&self) -> &[MlpParams] {
        &self.critics
    }

    pub fn critic_targets(&self) -> &[MlpParams] {
        &self.critic_targets
    }

    pub fn critic_targets_mut(&mut self) -> &mut [MlpParams] {
        &mut self.critic_targets
    }

    pub fn env_step_count(&self) -> u64 {
        self.env_step_count
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn actor_update_count(&self) -> u64 {
        self.actor_update_count
    }

    pub(crate) fn record_env_step(&mut self) {
        self.env_step_count += 1;
    }

    pub fn in_warmup(&self) -> bool {
        self.env_step_count < self.config.warmup_steps
    }

    /// Behaviour action. With `explore`, warmup steps draw uniformly from the
    /// action box; afterwards the actor output gets `N(0, sigma^2)` noise and
    /// is clipped back into the box.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        check_dim("state", self.state_dim, state.len())?;
        let bound = self.action_bound;
        if explore && self.in_warmup() {
            return Ok((0..self.action_dim)
                .map(|_| rng.random_range(-bound..=bound))
                .collect());
        }
        let mut action = self.actor.forward(state)?;
        if explore {
            let sigma = self.config.exploration_noise_std;
            for a in &mut action {
                let z: f64 = rng.sample(StandardNormal);
                *a = (*a + sigma * z).clamp(-bound, bound);
            }
        }
        Ok(action)
    }

    /// Target-actor actions plus clipped Gaussian noise, clipped to the box.
    pub fn smoothed_target_action<R: Rng + ?Sized>(
        &self,
        next_states: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if self.config.variant == Variant::Ddpg {
            return Err(Error::Unsupported(
                "target smoothing is not part of the ddpg variant".into(),
            ));
        }
        let n = next_states.len() / self.state_dim;
        let mut actions = self.actor_target.forward_batch(next_states, n)?;
        let (std, clip, bound) = (
            self.config.target_noise_std,
            self.config.target_noise_clip,
            self.action_bound,
        );
        for a in &mut actions {
            *a = (*a + clipped_gaussian(rng, std, clip)).clamp(-bound, bound);
        }
        Ok(actions)
    }

    /// Bootstrap targets `y = r + (1 - done) * gamma * bracket`.
    pub fn compute_target<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Result<Vec<f64>> {
        if batch.len == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        check_dim("batch state", self.state_dim, batch.state_dim)?;
        let n = batch.len;
        let next_values: Vec<f64> = match self.config.variant {
            Variant::Ddpg => {
                let next_actions = self.actor_target.forward_batch(&batch.next_states, n)?;
                let inputs = concat_rows(&batch.next_states, self.state_dim, &next_actions, self.action_dim);
                self.critic_targets[0].forward_batch(&inputs, n)?
            }
            Variant::Td3 | Variant::Wd3 => {
                let next_actions = self.smoothed_target_action(&batch.next_states, rng)?;
                let inputs = concat_rows(&batch.next_states, self.state_dim, &next_actions, self.action_dim);
                let q1 = self.critic_targets[0].forward_batch(&inputs, n)?;
                let q2 = self.critic_targets[1].forward_batch(&inputs, n)?;
                let beta = self.config.effective_beta();
                q1.iter()
                    .zip(&q2)
                    .map(|(a, b)| weighted_bracket(*a, *b, beta))
                    .collect()
            }
        };
        let gamma = self.config.gamma;
        Ok(batch
            .rewards
            .iter()
            .zip(&batch.done_masks)
            .zip(&next_values)
            .map(|((r, d), v)| r + (1.0 - d) * gamma * v)
            .collect())
    }

    /// One Adam step per online critic toward the shared `targets`. Returns
    /// the pre-update losses. A non-finite loss rejects the whole update.
    pub fn critic_update(&mut self, batch: &Batch, targets: &[f64]) -> Result<Vec<f64>> {
        check_dim("targets", batch.len, targets.len())?;
        let inputs = concat_rows(&batch.states, self.state_dim, &batch.actions, self.action_dim);
        let results = self
            .critics
            .iter()
            .map(|c| critic_loss_and_grads(c, &inputs, targets))
            .collect::<Result<Vec<_>>>()?;
        if let Some((loss, _)) = results.iter().find(|(l, g)| !l.is_finite() || !g.is_finite()) {
            return Err(Error::NumericalFailure(format!("critic loss {loss}")));
        }
        let lr = self.config.learning_rate;
        let mut losses = Vec::with_capacity(results.len());
        for ((critic, opt), (loss, grads)) in self
            .critics
            .iter_mut()
            .zip(&mut self.critic_opts)
            .zip(results)
        {
            opt.step(critic, &grads, lr)?;
            losses.push(loss);
        }
        Ok(losses)
    }

    /// One ascent step on `mean Q1(s, pi(s))`; returns the pre-update objective.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let (objective, grads) =
            actor_objective_and_grads(&self.actor, &self.critics[0], &batch.states, self.state_dim)?;
        if !objective.is_finite() {
            return Err(Error::NumericalFailure(format!("actor objective {objective}")));
        }
        self.actor_opt
            .step(&mut self.actor, &grads, self.config.learning_rate)?;
        Ok(objective)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let eta = self.config.soft_update_rate;
        for (t, o) in self.critic_targets.iter_mut().zip(&self.critics) {
            soft_update(t, o, eta)?;
        }
        soft_update(&mut self.actor_target, &self.actor, eta)
    }

    /// Target computation, critic regression, and every `policy_delay`-th
    /// time (every time for DDPG) the actor step plus target soft updates.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateDiagnostics> {
        let targets = self.compute_target(batch, rng)?;
        let critic_losses = self.critic_update(batch, &targets)?;
        self.update_count += 1;
        let actor_updated = match self.config.variant {
            Variant::Ddpg => true,
            Variant::Td3 | Variant::Wd3 => self.update_count % self.config.policy_delay == 0,
        };
        if actor_updated {
            self.actor_update(batch)?;
            self.soft_update_targets()?;
            self.actor_update_count += 1;
        }
        Ok(UpdateDiagnostics {
            critic_losses,
            mean_target: targets.iter().sum::<f64>() / targets.len() as f64,
            beta: self.config.effective_beta(),
            actor_updated,
        })
    }

    /// Critic-1 values at `(state, action)` rows.
    pub fn q_values(&self, states: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        let n = states.len() / self.state_dim;
        check_dim("q states", n * self.state_dim, states.len())?;
        check_dim("q actions", n * self.action_dim, actions.len())?;
        let inputs = concat_rows(states, self.state_dim, actions, self.action_dim);
        self.critics[0].forward_batch(&inputs, n)
    }

    /// Combined checksum over every online and target network.
    pub fn checksum(&self) -> u64 {
        let mut nets = vec![&self.actor, &self.actor_target];
        nets.extend(self.critics.iter());
        nets.extend(self.critic_targets.iter());
        nets.iter().fold(0u64, |acc, n| {
            acc.rotate_left(7) ^ n.checksum()
        })
    }

    pub fn write_checkpoint<W: Write>(&self, env: EnvKind, out: &mut W) -> Result<()> {
        writeln!(out, "{CHECKPOINT_HEADER}")?;
        writeln!(out, "env {}", env.name())?;
        writeln!(out, "variant {}", self.config.variant)?;
        writeln!(out, "env_steps {}", self.env_step_count)?;
        writeln!(out, "updates {}", self.update_count)?;
        let mut named: Vec<(String, &MlpParams)> =
            vec![("actor".into(), &self.actor), ("actor_target".into(), &self.actor_target)];
        for (i, (c, t)) in self.critics.iter().zip(&self.critic_targets).enumerate() {
            named.push((format!("critic_{}", i + 1), c));
            named.push((format!("critic_{}_target", i + 1), t));
        }
        for (name, net) in named {
            writeln!(out, "network {name}")?;
            write_snapshot(net, out)?;
        }
        Ok(())
    }
}

impl Policy for Agent {
    fn act_batch(&self, states: &[f64], n: usize) -> Result<Vec<f64>> {
        self.actor.forward_batch(states, n)
    }
}

pub const CHECKPOINT_HEADER: &str = "wd3-checkpoint v1";

/// Networks read back from [`Agent::write_checkpoint`].
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub env: EnvKind,
    pub variant: Variant,
    pub env_steps: u64,
    pub updates: u64,
    pub networks: Vec<(String, MlpParams)>,
}

impl Checkpoint {
    pub fn read<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut line = String::new();
        let mut next = |input: &mut R| -> Result<Option<String>> {
            line.clear();
            Ok((input.read_line(&mut line)? > 0).then(|| line.trim_end().to_string()))
        };
        let header = next(input)?.unwrap_or_default();
        if header != CHECKPOINT_HEADER {
            return Err(Error::Snapshot(format!("unsupported checkpoint header '{header}'")));
        }
        let field = |l: Option<String>, key: &str| -> Result<String> {
            l.and_then(|l| l.strip_prefix(&format!("{key} ")).map(str::to_string))
                .ok_or_else(|| Error::Snapshot(format!("missing '{key}' line")))
        };
        let env = field(next(input)?, "env")?.parse()?;
        let variant = field(next(input)?, "variant")?.parse()?;
        let parse_u64 = |s: String| s.parse::<u64>().map_err(|_| Error::Snapshot(format!("bad count '{s}'")));
        let env_steps = parse_u64(field(next(input)?, "env_steps")?)?;
        let updates = parse_u64(field(next(input)?, "updates")?)?;
        let mut networks = Vec::new();
        while let Some(l) = next(input)? {
            if l.is_empty() {
                continue;
            }
            let name = l
                .strip_prefix("network ")
                .ok_or_else(|| Error::Snapshot(format!("expected network line, got '{l}'")))?
                .to_string();
            networks.push((name, read_snapshot(input)?));
        }
        Ok(Self {
            env,
            variant,
            env_steps,
            updates,
            networks,
        })
    }

    pub fn network(&self, name: &str) -> Option<&MlpParams> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn actor(&self) -> Result<&MlpParams> {
        self.network("actor")
            .ok_or_else(|| Error::Snapshot("checkpoint has no actor".into()))
    }
}
