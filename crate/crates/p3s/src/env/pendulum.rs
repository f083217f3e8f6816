//! Torque-limited pendulum swing-up.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, Env, EnvSpec, StepResult};
use crate::error::{Error, Result};

const DT: f64 = 0.05;
const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const HORIZON: u32 = 200;

/// Classic swing-up: angle 0 is upright, torque is the single action, and
/// the cost penalizes angle, angular velocity and control effort. Episodes
/// only end by truncation.
#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    steps: u32,
    needs_reset: bool,
}

impl Pendulum {
    pub fn new() -> Pendulum {
        Pendulum {
            spec: EnvSpec::new(3, 1, vec![-MAX_TORQUE], vec![MAX_TORQUE], HORIZON),
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            needs_reset: true,
        }
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

fn angle_normalize(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    ((x + PI).rem_euclid(two_pi)) - PI
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.theta = (2.0 * rng.random::<f64>() - 1.0) * PI;
        self.theta_dot = 2.0 * rng.random::<f64>() - 1.0;
        self.steps = 0;
        self.needs_reset = false;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::NeedsReset);
        }
        check_action(&self.spec, action)?;
        let u = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let th = angle_normalize(self.theta);
        let cost = th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u;

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin()
            + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;
        self.steps += 1;

        let truncated = self.steps >= self.spec.max_episode_steps;
        if truncated {
            self.needs_reset = true;
        }
        Ok(StepResult {
            obs: self.observe(),
            reward: -cost,
            done: false,
            truncated,
        })
    }
}
