//! Environment abstraction and built-in continuous-control tasks.
//!
//! Tasks are lightweight stand-ins for physics benchmarks: a 2D
//! double-integrator point mass (dense- and sparse-reward variants) and a
//! torque-limited pendulum swing-up. A delayed-reward wrapper accumulates
//! rewards and emits them periodically, sparsifying any base task.
//!
//! Environments are registered by string id:
//!
//! - `pointmass-dense`
//! - `pointmass-sparse`
//! - `pendulum`
//! - `delayed:<id>:<f>` (append `:drop` to discard the remainder at episode
//!   end instead of flushing it)

mod delayed;
mod pendulum;
mod point_mass;

pub use delayed::DelayedWrapper;
pub use pendulum::Pendulum;
pub use point_mass::PointMass;

use crate::error::{Error, Result};

/// Static description of an environment's interface.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Per-dimension [low, high] action bounds.
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: u32,
}

impl EnvSpec {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        max_episode_steps: u32,
    ) -> EnvSpec {
        assert!(obs_dim >= 1 && act_dim >= 1);
        assert_eq!(action_low.len(), act_dim);
        assert_eq!(action_high.len(), act_dim);
        assert!(action_low.iter().zip(&action_high).all(|(l, h)| l < h));
        assert!(max_episode_steps >= 1);
        EnvSpec {
            obs_dim,
            act_dim,
            action_low,
            action_high,
            max_episode_steps,
        }
    }
}

/// One environment step: next observation, reward, and how (if) the
/// episode ended. `done` marks genuine termination; `truncated` marks the
/// step limit. Bootstrapped targets treat truncation as non-terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

/// A seedable, single-owner environment instance.
///
/// `reset` must be called before the first `step` and after any step that
/// ended the episode; stepping a finished episode is an error. Given the
/// same (seed, action sequence), trajectories are bitwise identical.
pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

/// Instantiate an environment from its registry id.
pub fn make_env(id: &str) -> Result<Box<dyn Env>> {
    if let Some(rest) = id.strip_prefix("delayed:") {
        let (rest, drop) = match rest.strip_suffix(":drop") {
            Some(pre) => (pre, true),
            None => (rest, false),
        };
        let (inner_id, f_str) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::UnknownEnv(id.to_string()))?;
        let f: u32 = f_str
            .parse()
            .map_err(|_| Error::UnknownEnv(id.to_string()))?;
        if f == 0 {
            return Err(Error::Config("delayed f_reward must be >= 1".into()));
        }
        let inner = make_env(inner_id)?;
        return Ok(Box::new(DelayedWrapper::new(inner, f, !drop)));
    }
    match id {
        "pointmass-dense" => Ok(Box::new(PointMass::dense())),
        "pointmass-sparse" => Ok(Box::new(PointMass::sparse())),
        "pendulum" => Ok(Box::new(Pendulum::new())),
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}

pub(crate) fn check_action(spec: &EnvSpec, action: &[f64]) -> Result<()> {
    if action.len() != spec.act_dim {
        return Err(Error::DimMismatch {
            expected: spec.act_dim,
            got: action.len(),
            context: "env action",
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_all_builtin_ids() {
        for id in ["pointmass-dense", "pointmass-sparse", "pendulum"] {
            let env = make_env(id).unwrap();
            assert!(env.spec().obs_dim >= 1);
        }
        assert!(make_env("cartpole").is_err());
    }

    #[test]
    fn registry_parses_delayed_ids() {
        let env = make_env("delayed:pointmass-sparse:20").unwrap();
        assert_eq!(env.spec().obs_dim, 6);
        assert!(make_env("delayed:pendulum:0").is_err());
        assert!(make_env("delayed:pendulum:xyz").is_err());
        assert!(make_env("delayed:nope:5").is_err());
        // nested wrapping parses too
        assert!(make_env("delayed:delayed:pendulum:2:3").is_ok());
        assert!(make_env("delayed:pendulum:7:drop").is_ok());
    }

    #[test]
    fn reset_is_deterministic_and_obs_sized() {
        for id in ["pointmass-dense", "pointmass-sparse", "pendulum"] {
            let mut a = make_env(id).unwrap();
            let mut b = make_env(id).unwrap();
            let oa = a.reset(1234);
            let ob = b.reset(1234);
            assert_eq!(oa, ob, "{id}");
            assert_eq!(oa.len(), a.spec().obs_dim, "{id}");
            assert_ne!(a.reset(1235), oa, "{id}");
        }
    }

    #[test]
    fn stepping_before_reset_or_after_done_is_an_error() {
        let mut env = make_env("pointmass-dense").unwrap();
        assert!(env.step(&[0.0, 0.0]).is_err());
        env.reset(7);
        for _ in 0..200 {
            let r = env.step(&[0.1, 0.0]).unwrap();
            if r.episode_over() {
                break;
            }
        }
        assert!(env.step(&[0.1, 0.0]).is_err());
    }

    #[test]
    fn trajectories_are_pure_functions_of_seed_and_actions() {
        let run = || {
            let mut env = make_env("pendulum").unwrap();
            let mut obs = env.reset(99);
            let mut trace = vec![obs.clone()];
            for k in 0..50 {
                let a = [((k as f64) * 0.37).sin()];
                let r = env.step(&a).unwrap();
                obs = r.obs.clone();
                trace.push(obs.clone());
                trace.push(vec![r.reward]);
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn observations_and_rewards_stay_finite() {
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for id in ["pointmass-dense", "pointmass-sparse", "pendulum"] {
            let mut env = make_env(id).unwrap();
            let mut obs = env.reset(3);
            for _ in 0..400 {
                let spec = env.spec().clone();
                let a: Vec<f64> = (0..spec.act_dim)
                    .map(|d| {
                        let half = (spec.action_high[d] - spec.action_low[d]) / 2.0;
                        next() * half
                    })
                    .collect();
                let r = env.step(&a).unwrap();
                assert!(r.reward.is_finite());
                assert!(r.obs.iter().all(|x| x.is_finite()));
                obs = if r.episode_over() { env.reset(4) } else { r.obs };
            }
            assert_eq!(obs.len(), env.spec().obs_dim);
        }
    }
}
