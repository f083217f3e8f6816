//! Delayed-reward wrapper: accumulate rewards, emit them periodically.

use super::{Env, EnvSpec, StepResult};
use crate::error::Result;

/// Wraps any environment so the agent sees reward 0 except every
/// `f_reward`-th step, when the accumulated sum is emitted and the
/// accumulator resets. At episode end the remainder is flushed (default)
/// so the episode return is preserved, or dropped when `flush_remainder`
/// is false.
pub struct DelayedWrapper {
    inner: Box<dyn Env>,
    f_reward: u32,
    flush_remainder: bool,
    accumulator: f64,
    steps_since_emit: u32,
}

impl DelayedWrapper {
    pub fn new(inner: Box<dyn Env>, f_reward: u32, flush_remainder: bool) -> DelayedWrapper {
        assert!(f_reward >= 1, "f_reward must be >= 1");
        DelayedWrapper {
            inner,
            f_reward,
            flush_remainder,
            accumulator: 0.0,
            steps_since_emit: 0,
        }
    }

    pub fn f_reward(&self) -> u32 {
        self.f_reward
    }
}

impl Env for DelayedWrapper {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.accumulator = 0.0;
        self.steps_since_emit = 0;
        self.inner.reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let mut result = self.inner.step(action)?;
        self.accumulator += result.reward;
        self.steps_since_emit += 1;

        let period_hit = self.steps_since_emit == self.f_reward;
        let episode_over = result.episode_over();
        result.reward = if period_hit || (episode_over && self.flush_remainder) {
            let emitted = self.accumulator;
            self.accumulator = 0.0;
            self.steps_since_emit = 0;
            emitted
        } else {
            if episode_over {
                // dropped remainder
                self.accumulator = 0.0;
                self.steps_since_emit = 0;
            }
            0.0
        };
        Ok(result)
    }
}
