use rand::Rng;

use crate::agents::Policy;
use crate::envs::{Env, EnvKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub seed: u64,
    pub env_step: u64,
    pub mean_return: f64,
    /// Population standard deviation over episodes.
    pub std_return: f64,
    pub episode_count: usize,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Undiscounted returns of `episodes` noise-free rollouts of `policy`.
/// Reset seeds come from a stream seeded with `rng_seed`, so equal seeds
/// give equal start states.
pub fn episode_returns<P: Policy + ?Sized>(
    policy: &P,
    env: EnvKind,
    episodes: usize,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be >= 1".into()));
    }
    let mut resets = crate::rng::stream(rng_seed, 0);
    let mut env = Env::new(env);
    (0..episodes)
        .map(|_| {
            let mut obs = env.reset(resets.random());
            let mut total = 0.0;
            loop {
                let step = env.step(&policy.act(&obs)?)?;
                total += step.reward;
                if step.episode_over() {
                    return Ok(total);
                }
                obs = step.observation;
            }
        })
        .collect()
}

pub fn evaluate_policy<P: Policy + ?Sized>(
    policy: &P,
    env: EnvKind,
    episodes: usize,
    rng_seed: u64,
) -> Result<(f64, f64)> {
    Ok(mean_std(&episode_returns(policy, env, episodes, rng_seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, OutputActivation};

    #[test]
    fn resting_double_integrator_return() {
        struct Zero;
        impl Policy for Zero {
            fn act_batch(&self, _s: &[f64], n: usize) -> Result<Vec<f64>> {
                Ok(vec![0.0; n])
            }
        }
        // With a = 0 and v = 0 the state never moves: return = -200 x0^2.
        let returns = episode_returns(&Zero, EnvKind::DoubleIntegrator, 3, 5).unwrap();
        let mut resets = crate::rng::stream(5, 0);
        let mut env = Env::new(EnvKind::DoubleIntegrator);
        for r in returns {
            let x0 = env.reset(resets.random())[0];
            assert!((r + 200.0 * x0 * x0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_record() {
        let actor = init_params(3, 8, 1, OutputActivation::TanhScaled { bound: 2.0 }, 4).unwrap();
        let a = evaluate_policy(&actor, EnvKind::Pendulum, 10, 7).unwrap();
        assert_eq!(a, evaluate_policy(&actor, EnvKind::Pendulum, 10, 7).unwrap());
        assert_ne!(a, evaluate_policy(&actor, EnvKind::Pendulum, 10, 8).unwrap());
        assert!(a.1 >= 0.0);
    }

    #[test]
    fn returns_match_direct_rollout() {
        let actor = init_params(6, 8, 2, OutputActivation::TanhScaled { bound: 1.0 }, 2).unwrap();
        let returns = episode_returns(&actor, EnvKind::Reacher, 2, 11).unwrap();
        let mut resets = crate::rng::stream(11, 0);
        let mut env = Env::new(EnvKind::Reacher);
        for r in returns {
            let mut obs = env.reset(resets.random());
            let mut total = 0.0;
            for _ in 0..200 {
                let step = env.step(&actor.forward(&obs).unwrap()).unwrap();
                total += step.reward;
                obs = step.observation;
            }
            assert_eq!(r, total);
        }
    }

    #[test]
    fn mean_std_is_population() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn zero_episodes_rejected() {
        let actor = init_params(2, 4, 1, OutputActivation::TanhScaled { bound: 1.0 }, 0).unwrap();
        assert!(evaluate_policy(&actor, EnvKind::DoubleIntegrator, 0, 0).is_err());
    }
}
