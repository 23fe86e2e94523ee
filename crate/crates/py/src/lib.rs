//! Python bindings: environments, the replay buffer, training, evaluation,
//! the bias probe and the theory checks.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;

use wd3_core::agents::{weighted_bracket as bracket, AgentConfig, Policy, Trainer, Variant};
use wd3_core::envs::{Env, EnvKind};
use wd3_core::probe::{probe_agent, ProbeConfig};
use wd3_core::replay::{ReplayBuffer, Transition};
use wd3_core::rng::RunRng;
use wd3_core::runner::eval::evaluate_policy;
use wd3_core::runner::{parse_config, run_experiment};
use wd3_core::theory::{self, NoiseModel};
use wd3_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Config(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn env_kind(name: &str) -> PyResult<EnvKind> {
    name.parse().map_err(py_err)
}

fn noise_model(kind: &str, scale: f64, n: usize) -> PyResult<NoiseModel> {
    match kind {
        "gaussian" => NoiseModel::gaussian(scale, n),
        "uniform" => NoiseModel::uniform(scale, n),
        _ => return Err(PyValueError::new_err(format!("unknown noise kind '{kind}'"))),
    }
    .map_err(py_err)
}

#[pyclass(name = "Env")]
struct PyEnv {
    inner: Env,
}

#[pymethods]
impl PyEnv {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Env::new(env_kind(name)?),
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.spec().state_dim
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.spec().action_dim
    }

    #[getter]
    fn action_bound(&self) -> f64 {
        self.inner.spec().action_bound
    }

    #[getter]
    fn max_episode_steps(&self) -> usize {
        self.inner.spec().max_episode_steps
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed)
    }

    /// Returns `(observation, reward, done, truncated)`.
    fn step(&mut self, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, bool)> {
        let s = self.inner.step(&action).map_err(py_err)?;
        Ok((s.observation, s.reward, s.done, s.truncated))
    }
}

#[pyclass(name = "ReplayBuffer")]
struct PyReplayBuffer {
    inner: ReplayBuffer,
    rng: RunRng,
}

#[pymethods]
impl PyReplayBuffer {
    #[new]
    #[pyo3(signature = (capacity, state_dim, action_dim, seed=0))]
    fn new(capacity: usize, state_dim: usize, action_dim: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: ReplayBuffer::new(capacity, state_dim, action_dim).map_err(py_err)?,
            rng: RunRng::seed_from_u64(seed),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.inner.capacity()
    }

    fn push(&mut self, state: Vec<f64>, action: Vec<f64>, reward: f64, next_state: Vec<f64>, done: bool) -> PyResult<()> {
        self.inner
            .push(Transition {
                state,
                action,
                reward,
                next_state,
                done_mask: if done { 1.0 } else { 0.0 },
            })
            .map_err(py_err)
    }

    /// Uniform sample with replacement, as a dict of flat lists.
    fn sample<'py>(&mut self, py: Python<'py>, batch_size: usize) -> PyResult<Bound<'py, PyDict>> {
        let b = self.inner.sample(batch_size, &mut self.rng).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("states", b.states)?;
        d.set_item("actions", b.actions)?;
        d.set_item("rewards", b.rewards)?;
        d.set_item("next_states", b.next_states)?;
        d.set_item("done_masks", b.done_masks)?;
        Ok(d)
    }
}

#[pyclass(name = "Trainer")]
struct PyTrainer {
    inner: Trainer,
}

#[pymethods]
impl PyTrainer {
    #[new]
    #[pyo3(signature = (env, variant="wd3", seed=0, beta=None, warmup_steps=None, hidden_dim=None, batch_size=None))]
    fn new(
        env: &str,
        variant: &str,
        seed: u64,
        beta: Option<f64>,
        warmup_steps: Option<u64>,
        hidden_dim: Option<usize>,
        batch_size: Option<usize>,
    ) -> PyResult<Self> {
        let variant: Variant = variant.parse().map_err(py_err)?;
        let mut cfg = AgentConfig::for_variant(variant);
        if let Some(b) = beta {
            cfg.beta = b;
        }
        if let Some(w) = warmup_steps {
            cfg.warmup_steps = w;
        }
        if let Some(h) = hidden_dim {
            cfg.hidden_dim = h;
        }
        if let Some(b) = batch_size {
            cfg.batch_size = b;
        }
        cfg.validate()
            .map_err(|(field, msg)| PyValueError::new_err(format!("{field}: {msg}")))?;
        Ok(Self {
            inner: Trainer::new(env_kind(env)?, cfg, seed).map_err(py_err)?,
        })
    }

    /// One environment step plus any learning it triggers.
    fn train_step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.train_step().map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("env_step", s.env_step)?;
        d.set_item("reward", s.reward)?;
        d.set_item("episode_return", s.finished_episode_return)?;
        if let Some(u) = s.update {
            d.set_item("critic_losses", u.critic_losses)?;
            d.set_item("mean_target", u.mean_target)?;
            d.set_item("actor_updated", u.actor_updated)?;
        }
        Ok(d)
    }

    /// Runs `steps` training steps and returns the finished episode returns.
    fn train(&mut self, py: Python<'_>, steps: u64) -> PyResult<Vec<f64>> {
        let inner = &mut self.inner;
        py.detach(|| {
            let mut returns = Vec::new();
            for _ in 0..steps {
                if let Some(r) = inner.train_step()?.finished_episode_return {
                    returns.push(r);
                }
            }
            Ok(returns)
        })
        .map_err(py_err)
    }

    fn act(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.agent().act(&state).map_err(py_err)
    }

    fn q_value(&self, state: Vec<f64>, action: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.agent().q_values(&state, &action).map_err(py_err)?[0])
    }

    /// Mean and standard deviation of noise-free episode returns.
    #[pyo3(signature = (episodes=10, seed=0))]
    fn evaluate(&self, episodes: usize, seed: u64) -> PyResult<(f64, f64)> {
        evaluate_policy(self.inner.agent(), self.inner.env_kind(), episodes, seed).map_err(py_err)
    }

    /// Critic bias probe; returns `(mean_q, mean_true_return, bias)`.
    #[pyo3(signature = (trajectories=10, transitions=200, horizon=1000, seed=0))]
    fn probe(&self, trajectories: usize, transitions: usize, horizon: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
        let cfg = ProbeConfig {
            trajectory_count: trajectories,
            transitions_per_trajectory: transitions,
            horizon,
            ..ProbeConfig::default()
        };
        let agent = self.inner.agent();
        let r = probe_agent(agent, self.inner.env_kind(), &cfg, agent.env_step_count(), seed).map_err(py_err)?;
        Ok((r.mean_estimated_q, r.mean_true_return, r.bias()))
    }

    #[getter]
    fn env_steps(&self) -> u64 {
        self.inner.agent().env_step_count()
    }

    #[getter]
    fn updates(&self) -> u64 {
        self.inner.agent().update_count()
    }

    fn checksum(&self) -> u64 {
        self.inner.agent().checksum()
    }
}

#[pyfunction]
fn weighted_bracket(q1: f64, q2: f64, beta: f64) -> f64 {
    bracket(q1, q2, beta)
}

#[pyfunction]
#[pyo3(signature = (kind, scale, n=2))]
fn closed_form_min_bias(kind: &str, scale: f64, n: usize) -> PyResult<f64> {
    theory::closed_form_min_bias(&noise_model(kind, scale, n)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (kind, scale, beta))]
fn weighted_bias_prediction(kind: &str, scale: f64, beta: f64) -> PyResult<f64> {
    theory::weighted_bias_prediction(&noise_model(kind, scale, 2)?, beta).map_err(py_err)
}

/// Returns `(mean, standard_error)` of `min` over `n` draws.
#[pyfunction]
#[pyo3(signature = (kind, scale, n=2, samples=1_000_000, seed=0))]
fn monte_carlo_min_bias(kind: &str, scale: f64, n: usize, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
    let est = theory::monte_carlo_min_bias(&noise_model(kind, scale, n)?, samples, seed).map_err(py_err)?;
    Ok((est.empirical_mean, est.standard_error))
}

/// The verification table as CSV lines, header first.
#[pyfunction]
#[pyo3(signature = (samples=1_000_000, seed=0))]
fn theory_table(samples: usize, seed: u64) -> PyResult<Vec<String>> {
    let rows = theory::verification_table(&theory::default_models(), samples, seed).map_err(py_err)?;
    let mut out = vec![theory::THEORY_HEADER.to_string()];
    out.extend(rows.iter().map(|r| r.to_string()));
    Ok(out)
}

/// Validates configuration text and returns it in normalized form.
#[pyfunction]
fn normalize_config(text: &str) -> PyResult<String> {
    parse_config(text)
        .map(|c| c.to_text())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs a full experiment; returns `(label, mean_last5, std_over_seeds, n_seeds)`.
#[pyfunction]
fn run_config(py: Python<'_>, text: &str) -> PyResult<(String, f64, f64, usize)> {
    let cfg = parse_config(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = py.detach(|| run_experiment(&cfg)).map_err(py_err)?;
    let s = out.summary;
    Ok((s.label, s.mean_of_last_k, s.std_over_seeds, s.n_seeds))
}

#[pymodule]
fn wd3(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyReplayBuffer>()?;
    m.add_class::<PyTrainer>()?;
    m.add_function(wrap_pyfunction!(weighted_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_min_bias, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_bias_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_min_bias, m)?)?;
    m.add_function(wrap_pyfunction!(theory_table, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
