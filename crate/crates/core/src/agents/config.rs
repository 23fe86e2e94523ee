use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Single critic, bootstrapped from its own target network.
    Ddpg,
    /// Clipped double Q: bootstrap from `min(Q1', Q2')`.
    Td3,
    /// Weighted pair: `beta * min + (1 - beta) * mean`.
    Wd3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ddpg, Variant::Td3, Variant::Wd3];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ddpg => "ddpg",
            Variant::Td3 => "td3",
            Variant::Wd3 => "wd3",
        }
    }

    pub fn critic_count(self) -> usize {
        match self {
            Variant::Ddpg => 1,
            Variant::Td3 | Variant::Wd3 => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant '{s}' (expected ddpg, td3 or wd3)")))
    }
}

/// Every scalar of the training loop.
///
/// `Default` gives the desk-scale setup (64 hidden units, 1,000 warmup
/// steps); [`AgentConfig::full_scale`] restores 256 units and 25,000 warmup
/// steps. The remaining values are shared by both.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub variant: Variant,
    /// Weight on `min(Q1', Q2')`; ignored by DDPG, forced to 1 by TD3.
    pub beta: f64,
    pub gamma: f64,
    /// Critic updates per actor/target update (ignored by DDPG).
    pub policy_delay: u64,
    pub soft_update_rate: f64,
    /// Behaviour noise std, in raw action units.
    pub exploration_noise_std: f64,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Environment steps of uniform random actions before learning starts.
    pub warmup_steps: u64,
    pub hidden_dim: usize,
    pub replay_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Wd3,
            beta: 0.45,
            gamma: 0.99,
            policy_delay: 2,
            soft_update_rate: 0.005,
            exploration_noise_std: 0.1,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            learning_rate: 3e-4,
            batch_size: 100,
            warmup_steps: 1_000,
            hidden_dim: 64,
            replay_capacity: 1_000_000,
        }
    }
}

impl AgentConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn full_scale(variant: Variant) -> Self {
        Self {
            variant,
            warmup_steps: 25_000,
            hidden_dim: 256,
            ..Self::default()
        }
    }

    /// The weight actually used in the target bracket.
    pub fn effective_beta(&self) -> f64 {
        match self.variant {
            Variant::Td3 => 1.0,
            Variant::Ddpg | Variant::Wd3 => self.beta,
        }
    }

    /// Checks ranges; the error names the offending field.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        fn check(ok: bool, field: &'static str, msg: impl Into<String>) -> std::result::Result<(), (&'static str, String)> {
            if ok {
                Ok(())
            } else {
                Err((field, msg.into()))
            }
        }
        check((0.0..=1.0).contains(&self.beta), "beta", format!("must lie in [0, 1], got {}", self.beta))?;
        check((0.0..1.0).contains(&self.gamma), "gamma", format!("must lie in [0, 1), got {}", self.gamma))?;
        check(self.policy_delay >= 1, "policy_delay", "must be >= 1")?;
        check(
            self.soft_update_rate > 0.0 && self.soft_update_rate <= 1.0,
            "soft_update_rate",
            format!("must lie in (0, 1], got {}", self.soft_update_rate),
        )?;
        check(
            self.exploration_noise_std >= 0.0 && self.exploration_noise_std.is_finite(),
            "exploration_noise_std",
            format!("must be >= 0, got {}", self.exploration_noise_std),
        )?;
        check(
            self.target_noise_std >= 0.0 && self.target_noise_std.is_finite(),
            "target_noise_std",
            format!("must be >= 0, got {}", self.target_noise_std),
        )?;
        check(
            self.target_noise_clip > 0.0 && self.target_noise_clip.is_finite(),
            "target_noise_clip",
            format!("must be > 0, got {}", self.target_noise_clip),
        )?;
        check(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate",
            format!("must be > 0, got {}", self.learning_rate),
        )?;
        check(self.batch_size >= 1, "batch_size", "must be >= 1")?;
        check(self.hidden_dim >= 1, "hidden_dim", "must be >= 1")?;
        check(
            self.replay_capacity >= self.batch_size,
            "replay_capacity",
            format!("must be >= batch_size ({})", self.batch_size),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_training_setup() {
        let c = AgentConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.beta, 0.45);
        assert_eq!(c.policy_delay, 2);
        assert_eq!(c.soft_update_rate, 0.005);
        assert_eq!(c.learning_rate, 3e-4);
        assert_eq!(c.batch_size, 100);
        assert_eq!(AgentConfig::full_scale(Variant::Wd3).warmup_steps, 25_000);
        assert_eq!(AgentConfig::full_scale(Variant::Wd3).hidden_dim, 256);
    }

    #[test]
    fn validation_names_field() {
        let c = AgentConfig {
            beta: 1.5,
            ..AgentConfig::default()
        };
        assert_eq!(c.validate().unwrap_err().0, "beta");
        let c = AgentConfig {
            gamma: 1.0,
            ..AgentConfig::default()
        };
        assert_eq!(c.validate().unwrap_err().0, "gamma");
        let c = AgentConfig {
            target_noise_clip: 0.0,
            ..AgentConfig::default()
        };
        assert_eq!(c.validate().unwrap_err().0, "target_noise_clip");
    }

    #[test]
    fn td3_forces_unit_beta() {
        let c = AgentConfig {
            beta: 0.3,
            ..AgentConfig::for_variant(Variant::Td3)
        };
        assert_eq!(c.effective_beta(), 1.0);
        assert_eq!(AgentConfig::for_variant(Variant::Wd3).effective_beta(), 0.45);
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("sac".parse::<Variant>().is_err());
    }
}
