//! Flat `key=value` run configuration.
//!
//! One entry per line, `#` starts a comment, agent and probe settings use
//! dotted keys (`agent.beta=0.45`). `env_name` and `variant` are required;
//! everything else has a default:
//!
//! | key | default |
//! |-----|---------|
//! | `total_steps` | 30000 |
//! | `eval_every` | 1000 |
//! | `eval_episodes` | 10 |
//! | `seeds` | `0,1,2,3,4` |
//! | `output_dir` | `runs` |
//! | `probe_enabled` | false |
//! | `probe_every` | 1000 |
//! | `probe.trajectory_count` | 50 |
//! | `probe.transitions_per_trajectory` | 1000 |
//! | `probe.horizon` | 1000 |
//! | `probe.basis` | `visited-pairs` (or `trajectory-starts`) |
//! | `agent.beta` | 0.45 |
//! | `agent.gamma` | 0.99 |
//! | `agent.policy_delay` | 2 |
//! | `agent.soft_update_rate` | 0.005 |
//! | `agent.exploration_noise_std` | 0.1 |
//! | `agent.target_noise_std` | 0.2 |
//! | `agent.target_noise_clip` | 0.5 |
//! | `agent.learning_rate` | 0.0003 |
//! | `agent.batch_size` | 100 |
//! | `agent.warmup_steps` | 1000 |
//! | `agent.hidden_dim` | 64 |
//! | `agent.replay_capacity` | 1000000 |

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::agents::{AgentConfig, Variant};
use crate::envs::EnvKind;
use crate::probe::{ProbeConfig, ReturnBasis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{at}: expected key=value, got '{text}'")]
    Syntax { at: String, text: String },
    #[error("{at}: unknown key '{key}'")]
    UnknownKey { at: String, key: String },
    #[error("{at}: duplicate key '{key}'")]
    DuplicateKey { at: String, key: String },
    #[error("{at}: invalid value for {key}: {msg}")]
    InvalidValue { at: String, key: String, msg: String },
    #[error("missing required field '{0}'")]
    Missing(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub agent: AgentConfig,
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub probe_enabled: bool,
    pub probe_every: u64,
    pub probe: ProbeConfig,
}

impl RunConfig {
    /// Desk-scale defaults for the given environment and variant.
    pub fn new(env: EnvKind, variant: Variant) -> Self {
        Self {
            env,
            agent: AgentConfig::for_variant(variant),
            total_steps: 30_000,
            eval_every: 1_000,
            eval_episodes: 10,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: PathBuf::from("runs"),
            probe_enabled: false,
            probe_every: 1_000,
            probe: ProbeConfig::default(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.agent.variant
    }

    /// Serializes every key; `parse_config(to_text())` gives back `self`.
    pub fn to_text(&self) -> String {
        let a = &self.agent;
        let p = &self.probe;
        let seeds = self
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let basis = match p.basis {
            ReturnBasis::VisitedPairs => "visited-pairs",
            ReturnBasis::TrajectoryStarts => "trajectory-starts",
        };
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("env_name", self.env.to_string());
        put("variant", a.variant.to_string());
        put("total_steps", self.total_steps.to_string());
        put("eval_every", self.eval_every.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("seeds", seeds);
        put("output_dir", self.output_dir.to_string_lossy().into_owned());
        put("probe_enabled", self.probe_enabled.to_string());
        put("probe_every", self.probe_every.to_string());
        put("probe.trajectory_count", p.trajectory_count.to_string());
        put("probe.transitions_per_trajectory", p.transitions_per_trajectory.to_string());
        put("probe.horizon", p.horizon.to_string());
        put("probe.basis", basis.to_string());
        put("agent.beta", a.beta.to_string());
        put("agent.gamma", a.gamma.to_string());
        put("agent.policy_delay", a.policy_delay.to_string());
        put("agent.soft_update_rate", a.soft_update_rate.to_string());
        put("agent.exploration_noise_std", a.exploration_noise_std.to_string());
        put("agent.target_noise_std", a.target_noise_std.to_string());
        put("agent.target_noise_clip", a.target_noise_clip.to_string());
        put("agent.learning_rate", a.learning_rate.to_string());
        put("agent.batch_size", a.batch_size.to_string());
        put("agent.warmup_steps", a.warmup_steps.to_string());
        put("agent.hidden_dim", a.hidden_dim.to_string());
        put("agent.replay_capacity", a.replay_capacity.to_string());
        out
    }
}

struct Entry {
    key: String,
    value: String,
    at: String,
}

fn split_entry(text: &str, at: String) -> Result<Option<Entry>, ConfigError> {
    let content = text.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
        at: at.clone(),
        text: content.to_string(),
    })?;
    Ok(Some(Entry {
        key: key.trim().to_string(),
        value: value.trim().to_string(),
        at,
    }))
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Parses configuration text, then applies `key=value` overrides on top.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(e) = split_entry(line, format!("line {}", i + 1))? {
            if index.contains_key(&e.key) {
                return Err(ConfigError::DuplicateKey { at: e.at, key: e.key });
            }
            index.insert(e.key.clone(), entries.len());
            entries.push(e);
        }
    }
    for (i, o) in overrides.iter().enumerate() {
        let Some(e) = split_entry(o, format!("override #{}", i + 1))? else {
            continue;
        };
        match index.get(&e.key) {
            Some(&k) => entries[k] = e,
            None => {
                index.insert(e.key.clone(), entries.len());
                entries.push(e);
            }
        }
    }

    let find = |key: &str| index.get(key).map(|&k| &entries[k]);
    let env_entry = find("env_name").ok_or(ConfigError::Missing("env_name"))?;
    let env: EnvKind = parse_value(env_entry)?;
    let variant: Variant = parse_value(find("variant").ok_or(ConfigError::Missing("variant"))?)?;
    let mut cfg = RunConfig::new(env, variant);

    for e in &entries {
        apply(&mut cfg, e)?;
    }
    validate(&cfg, &find)?;
    Ok(cfg)
}

fn invalid(e: &Entry, msg: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        at: e.at.clone(),
        key: e.key.clone(),
        msg: msg.into(),
    }
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    e.value.parse::<T>().map_err(|err| invalid(e, err.to_string()))
}

fn apply(cfg: &mut RunConfig, e: &Entry) -> Result<(), ConfigError> {
    let a = &mut cfg.agent;
    match e.key.as_str() {
        "env_name" | "variant" => {}
        "total_steps" => cfg.total_steps = parse_value(e)?,
        "eval_every" => cfg.eval_every = parse_value(e)?,
        "eval_episodes" => cfg.eval_episodes = parse_value(e)?,
        "seeds" => {
            cfg.seeds = e
                .value
                .split(',')
                .map(|s| s.trim().parse::<u64>().map_err(|err| invalid(e, err.to_string())))
                .collect::<Result<_, _>>()?;
        }
        "output_dir" => cfg.output_dir = PathBuf::from(&e.value),
        "probe_enabled" => cfg.probe_enabled = parse_value(e)?,
        "probe_every" => cfg.probe_every = parse_value(e)?,
        "probe.trajectory_count" => cfg.probe.trajectory_count = parse_value(e)?,
        "probe.transitions_per_trajectory" => cfg.probe.transitions_per_trajectory = parse_value(e)?,
        "probe.horizon" => cfg.probe.horizon = parse_value(e)?,
        "probe.basis" => {
            cfg.probe.basis = match e.value.as_str() {
                "visited-pairs" => ReturnBasis::VisitedPairs,
                "trajectory-starts" => ReturnBasis::TrajectoryStarts,
                _ => return Err(invalid(e, "expected visited-pairs or trajectory-starts")),
            }
        }
        "agent.beta" => a.beta = parse_value(e)?,
        "agent.gamma" => a.gamma = parse_value(e)?,
        "agent.policy_delay" => a.policy_delay = parse_value(e)?,
        "agent.soft_update_rate" => a.soft_update_rate = parse_value(e)?,
        "agent.exploration_noise_std" => a.exploration_noise_std = parse_value(e)?,
        "agent.target_noise_std" => a.target_noise_std = parse_value(e)?,
        "agent.target_noise_clip" => a.target_noise_clip = parse_value(e)?,
        "agent.learning_rate" => a.learning_rate = parse_value(e)?,
        "agent.batch_size" => a.batch_size = parse_value(e)?,
        "agent.warmup_steps" => a.warmup_steps = parse_value(e)?,
        "agent.hidden_dim" => a.hidden_dim = parse_value(e)?,
        "agent.replay_capacity" => a.replay_capacity = parse_value(e)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                at: e.at.clone(),
                key: e.key.clone(),
            })
        }
    }
    Ok(())
}

fn validate<'a>(cfg: &RunConfig, find: &dyn Fn(&str) -> Option<&'a Entry>) -> Result<(), ConfigError> {
    let fail = |key: &str, msg: String| {
        let at = find(key).map_or_else(|| "default".to_string(), |e| e.at.clone());
        ConfigError::InvalidValue {
            at,
            key: key.to_string(),
            msg,
        }
    };
    if let Err((field, msg)) = cfg.agent.validate() {
        return Err(fail(&format!("agent.{field}"), msg));
    }
    if cfg.eval_every == 0 {
        return Err(fail("eval_every", "must be >= 1".into()));
    }
    if cfg.eval_episodes == 0 {
        return Err(fail("eval_episodes", "must be >= 1".into()));
    }
    if cfg.probe_every == 0 {
        return Err(fail("probe_every", "must be >= 1".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(fail("seeds", "must list at least one seed".into()));
    }
    let mut sorted = cfg.seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(fail("seeds", "seeds must be distinct".into()));
    }
    if cfg.total_steps < cfg.agent.warmup_steps {
        return Err(fail(
            "total_steps",
            format!("must be >= agent.warmup_steps ({})", cfg.agent.warmup_steps),
        ));
    }
    if cfg.probe.trajectory_count == 0 {
        return Err(fail("probe.trajectory_count", "must be >= 1".into()));
    }
    if cfg.probe.transitions_per_trajectory == 0 {
        return Err(fail("probe.transitions_per_trajectory", "must be >= 1".into()));
    }
    if !(cfg.agent.gamma.powi(cfg.probe.horizon as i32) < 1e-3) {
        return Err(fail(
            "probe.horizon",
            format!("gamma^horizon must be < 1e-3 (gamma = {})", cfg.agent.gamma),
        ));
    }
    Ok(())
}
