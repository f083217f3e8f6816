//! Deterministic evaluation protocol.
//!
//! At each evaluation instant every learner plays a fixed set of episodes
//! with its deterministic policy on freshly constructed environments.
//! Episode seeds depend only on (master seed, evaluation index, episode),
//! so all learners — and all schemes under the same master seed — are
//! scored on identical evaluation episodes, and training state is never
//! touched.

use crate::env::make_env;
use crate::error::Result;
use crate::harness::seeding::{derive_seed, Role};
use crate::td3::Learner;

/// Mean return of `episodes` deterministic episodes.
pub fn evaluate_policy(
    learner: &Learner,
    env_id: &str,
    episodes: usize,
    master_seed: u64,
    eval_index: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for episode in 0..episodes {
        let mut env = make_env(env_id)?;
        let seed = derive_seed(master_seed, Role::Eval, eval_index, episode as u64);
        let mut obs = env.reset(seed);
        loop {
            let action = learner.act_eval(&obs);
            let step = env.step(&action)?;
            total += step.reward;
            if step.episode_over() {
                break;
            }
            obs = step.obs;
        }
    }
    Ok(total / episodes as f64)
}
