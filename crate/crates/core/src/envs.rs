//! Toy continuous-control environments with exact dynamics.
//!
//! All three integrate with semi-implicit Euler (velocity first, then position
//! with the new velocity) at `dt = 0.05`, and compute the reward from the
//! state *before* the step together with the applied action. Rewards are
//! never positive.
//!
//! * `pendulum`: swing-up of a uniform rod, `theta = 0` upright.
//!   `theta_dot' = clip(theta_dot + (3g/(2l) sin(theta) + 3/(m l^2) u) dt, -8, 8)`,
//!   `theta' = theta + theta_dot' dt`, with `g = 10, m = 1, l = 1`, torque in `[-2, 2]`.
//!   Observation `(cos theta, sin theta, theta_dot)`, reward
//!   `-(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2)`. Reset draws
//!   `theta ~ U[-pi, pi]`, `theta_dot ~ U[-1, 1]`.
//! * `double-integrator`: `v' = v + a dt`, `x' = x + v' dt`, `a` in `[-1, 1]`,
//!   reward `-(x^2 + 0.1 v^2 + 0.001 a^2)`. Reset draws `x ~ U[-1, 1]`, `v = 0`.
//! * `reacher`: planar point mass chasing a goal, `v' = 0.95 v + f dt`,
//!   `p' = p + v' dt`, force in `[-1, 1]^2`, reward `-|p - g| - 0.001 |f|^2`.
//!   Reset draws position and goal from `U[-1, 1]^2`, velocity zero.
//!
//! Every episode is truncated after 200 steps; none of them terminates early.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

pub const DT: f64 = 0.05;
const HORIZON: usize = 200;

const PENDULUM_G: f64 = 10.0;
const PENDULUM_M: f64 = 1.0;
const PENDULUM_L: f64 = 1.0;
const PENDULUM_MAX_SPEED: f64 = 8.0;
const REACHER_DAMPING: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Pendulum,
    DoubleIntegrator,
    Reacher,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Pendulum, EnvKind::DoubleIntegrator, EnvKind::Reacher];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::DoubleIntegrator => "double-integrator",
            EnvKind::Reacher => "reacher",
        }
    }

    /// Long-form names accepted by `FromStr` next to `name()`.
    pub fn alias(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "PendulumSwingup",
            EnvKind::DoubleIntegrator => "DoubleIntegrator",
            EnvKind::Reacher => "PlanarReacher",
        }
    }

    pub fn spec(self) -> EnvSpec {
        let (state_dim, action_dim, action_bound) = match self {
            EnvKind::Pendulum => (3, 1, 2.0),
            EnvKind::DoubleIntegrator => (2, 1, 1.0),
            EnvKind::Reacher => (6, 2, 1.0),
        };
        EnvSpec {
            state_dim,
            action_dim,
            action_bound,
            max_episode_steps: HORIZON,
            discount_hint: 0.99,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.alias() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown environment '{s}' (expected pendulum, double-integrator or reacher)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Actions live in `[-action_bound, action_bound]^action_dim`.
    pub action_bound: f64,
    pub max_episode_steps: usize,
    pub discount_hint: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    /// pendulum `(theta, theta_dot)`; double integrator `(x, v)`;
    /// reacher `(x, y, vx, vy, gx, gy)`.
    pub internals: Vec<f64>,
    pub step_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// True terminal state. None of the built-in environments terminates.
    pub done: bool,
    /// Set only when the step limit is reached.
    pub truncated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let y = theta.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Clone, Debug)]
pub struct Env {
    kind: EnvKind,
    spec: EnvSpec,
    state: EnvState,
    step_limit: Option<usize>,
    active: bool,
}

impl Env {
    /// A new environment; call [`Env::reset`] before stepping.
    pub fn new(kind: EnvKind) -> Self {
        let spec = kind.spec();
        Self {
            kind,
            spec,
            state: EnvState {
                internals: vec![0.0; internal_dim(kind)],
                step_index: 0,
            },
            step_limit: Some(spec.max_episode_steps),
            active: false,
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Removes the step limit so rollouts can run past the training horizon.
    pub fn lift_step_limit(&mut self) {
        self.step_limit = None;
    }

    pub fn reset(&mut self, rng_seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let internals = match self.kind {
            EnvKind::Pendulum => vec![rng.random_range(-PI..=PI), rng.random_range(-1.0..=1.0)],
            EnvKind::DoubleIntegrator => vec![rng.random_range(-1.0..=1.0), 0.0],
            EnvKind::Reacher => {
                let (x, y) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
                let (gx, gy) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
                vec![x, y, 0.0, 0.0, gx, gy]
            }
        };
        self.state = EnvState {
            internals,
            step_index: 0,
        };
        self.active = true;
        self.observation()
    }

    /// Puts the environment into an explicit state, starting a fresh episode.
    pub fn set_internals(&mut self, internals: Vec<f64>) -> Result<Vec<f64>> {
        check_dim("environment internals", internal_dim(self.kind), internals.len())?;
        if internals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite environment state".into()));
        }
        self.state = EnvState {
            internals,
            step_index: 0,
        };
        self.active = true;
        Ok(self.observation())
    }

    pub fn observation(&self) -> Vec<f64> {
        let s = &self.state.internals;
        match self.kind {
            EnvKind::Pendulum => vec![s[0].cos(), s[0].sin(), s[1]],
            EnvKind::DoubleIntegrator | EnvKind::Reacher => s.clone(),
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if !self.active {
            return Err(Error::EpisodeFinished);
        }
        check_dim("action", self.spec.action_dim, action.len())?;
        let bound = self.spec.action_bound;
        if let Some(a) = action.iter().find(|a| !(a.abs() <= bound)) {
            return Err(Error::InvalidArgument(format!(
                "action component {a} outside [-{bound}, {bound}]"
            )));
        }
        let s = &mut self.state.internals;
        let reward = match self.kind {
            EnvKind::Pendulum => {
                let (theta, theta_dot, u) = (s[0], s[1], action[0]);
                let reward = -(wrap_angle(theta).powi(2) + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
                let accel = 3.0 * PENDULUM_G / (2.0 * PENDULUM_L) * theta.sin()
                    + 3.0 / (PENDULUM_M * PENDULUM_L * PENDULUM_L) * u;
                let new_dot = (theta_dot + accel * DT).clamp(-PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED);
                s[1] = new_dot;
                s[0] = theta + new_dot * DT;
                reward
            }
            EnvKind::DoubleIntegrator => {
                let (x, v, a) = (s[0], s[1], action[0]);
                let reward = -(x * x + 0.1 * v * v + 0.001 * a * a);
                let new_v = v + a * DT;
                s[1] = new_v;
                s[0] = x + new_v * DT;
                reward
            }
            EnvKind::Reacher => {
                let (dx, dy) = (s[0] - s[4], s[1] - s[5]);
                let reward =
                    -(dx * dx + dy * dy).sqrt() - 0.001 * (action[0] * action[0] + action[1] * action[1]);
                for axis in 0..2 {
                    let v = REACHER_DAMPING * s[2 + axis] + action[axis] * DT;
                    s[2 + axis] = v;
                    s[axis] += v * DT;
                }
                reward
            }
        };
        self.state.step_index += 1;
        let truncated = self
            .step_limit
            .is_some_and(|limit| self.state.step_index >= limit);
        if truncated {
            self.active = false;
        }
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: false,
            truncated,
        })
    }
}

fn internal_dim(kind: EnvKind) -> usize {
    match kind {
        EnvKind::Pendulum | EnvKind::DoubleIntegrator => 2,
        EnvKind::Reacher => 6,
    }
}

/// Deterministic rollout of `policy` from `reset(rng_seed)`, returning
/// `sum_t gamma^t r_t` over at most `horizon` steps.
pub fn true_discounted_return<P>(
    env: &mut Env,
    policy: &P,
    gamma: f64,
    horizon: usize,
    rng_seed: u64,
) -> Result<f64>
where
    P: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    if horizon > env.spec().max_episode_steps && env.step_limit.is_some() {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} exceeds the episode limit {}",
            env.spec().max_episode_steps
        )));
    }
    let mut obs = env.reset(rng_seed);
    let mut total = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        let step = env.step(&policy(&obs))?;
        total += discount * step.reward;
        discount *= gamma;
        if step.episode_over() {
            break;
        }
        obs = step.observation;
    }
    Ok(total)
}
