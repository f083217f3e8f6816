//! 2D double-integrator point mass with dense- and sparse-reward variants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, Env, EnvSpec, StepResult};
use crate::error::{Error, Result};

const DT: f64 = 0.05;
const V_MAX: f64 = 2.0;
const POS_BOUND: f64 = 3.0;
const HORIZON: u32 = 200;
const CTRL_COST: f64 = 0.01;
const GOAL_RADIUS: f64 = 0.1;
const START_SPREAD: f64 = 0.1;

const DENSE_GOAL: [f64; 2] = [1.0, 0.0];
const SPARSE_GOAL: [f64; 2] = [0.60, 0.45];

/// Point mass on the plane, acceleration-controlled.
///
/// Observation is `(pos, vel, goal - pos)`; actions are accelerations in
/// `[-1, 1]^2`. Velocity is clamped to `±2` and position to the `±3` box,
/// so states never escape. Episodes start near the origin with zero
/// velocity and truncate after 200 steps.
///
/// The dense variant pays `-|pos - goal|^2 - 0.01 |a|^2` every step. The
/// sparse variant pays `+1` and terminates when the mass is within 0.1 of
/// the goal, and `-0.01 |a|^2` otherwise — so a policy that does nothing
/// collects exactly zero, a local optimum that masks the goal reward.
#[derive(Debug, Clone)]
pub struct PointMass {
    spec: EnvSpec,
    sparse: bool,
    goal: [f64; 2],
    pos: [f64; 2],
    vel: [f64; 2],
    steps: u32,
    needs_reset: bool,
}

impl PointMass {
    pub fn dense() -> PointMass {
        Self::with_goal(false, DENSE_GOAL)
    }

    pub fn sparse() -> PointMass {
        Self::with_goal(true, SPARSE_GOAL)
    }

    pub fn with_goal(sparse: bool, goal: [f64; 2]) -> PointMass {
        PointMass {
            spec: EnvSpec::new(6, 2, vec![-1.0, -1.0], vec![1.0, 1.0], HORIZON),
            sparse,
            goal,
            pos: [0.0; 2],
            vel: [0.0; 2],
            steps: 0,
            needs_reset: true,
        }
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    fn observe(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.goal[0] - self.pos[0],
            self.goal[1] - self.pos[1],
        ]
    }
}

impl Env for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.pos = [
            (2.0 * rng.random::<f64>() - 1.0) * START_SPREAD,
            (2.0 * rng.random::<f64>() - 1.0) * START_SPREAD,
        ];
        self.vel = [0.0; 2];
        self.steps = 0;
        self.needs_reset = false;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::NeedsReset);
        }
        check_action(&self.spec, action)?;
        for d in 0..2 {
            self.vel[d] = (self.vel[d] + action[d] * DT).clamp(-V_MAX, V_MAX);
            self.pos[d] = (self.pos[d] + self.vel[d] * DT).clamp(-POS_BOUND, POS_BOUND);
        }
        self.steps += 1;

        let dx = self.pos[0] - self.goal[0];
        let dy = self.pos[1] - self.goal[1];
        let dist_sq = dx * dx + dy * dy;
        let ctrl = CTRL_COST * (action[0] * action[0] + action[1] * action[1]);

        let (reward, done) = if self.sparse {
            if dist_sq < GOAL_RADIUS * GOAL_RADIUS {
                (1.0, true)
            } else {
                (-ctrl, false)
            }
        } else {
            (-dist_sq - ctrl, false)
        };
        let truncated = !done && self.steps >= self.spec.max_episode_steps;
        if done || truncated {
            self.needs_reset = true;
        }
        Ok(StepResult {
            obs: self.observe(),
            reward,
            done,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dense_reward_matches_formula() {
        // place the mass at (1, 0) with goal (0, 0): zero action, zero
        // velocity -> reward is exactly -1.0
        let mut env = PointMass::with_goal(false, [0.0, 0.0]);
        env.reset(0);
        env.pos = [1.0, 0.0];
        env.vel = [0.0, 0.0];
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r.reward, -1.0);
    }

    #[test]
    fn sparse_zero_action_away_from_goal_costs_nothing() {
        let mut env = PointMass::sparse();
        env.reset(42);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(!r.done);
    }

    #[test]
    fn sparse_goal_pays_one_and_terminates() {
        let mut env = PointMass::sparse();
        env.reset(0);
        env.pos = [env.goal[0] - 0.05, env.goal[1]];
        env.vel = [0.0, 0.0];
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r.reward, 1.0);
        assert!(r.done);
        assert!(!r.truncated);
        assert!(env.step(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn episode_truncates_at_horizon() {
        let mut env = PointMass::dense();
        env.reset(5);
        for k in 0..200 {
            let r = env.step(&[0.01, 0.0]).unwrap();
            assert_eq!(r.truncated, k == 199);
            assert!(!r.done);
        }
    }

    #[test]
    fn state_respects_velocity_and_position_clamps() {
        let mut env = PointMass::dense();
        env.reset(5);
        for _ in 0..200 {
            let r = env.step(&[1.0, 1.0]).unwrap();
            assert!(r.obs[0].abs() <= POS_BOUND && r.obs[1].abs() <= POS_BOUND);
            assert!(r.obs[2].abs() <= V_MAX && r.obs[3].abs() <= V_MAX);
            if r.episode_over() {
                env.reset(6);
            }
        }
    }

    #[test]
    fn wrong_action_dim_is_rejected() {
        let mut env = PointMass::dense();
        env.reset(0);
        assert!(env.step(&[0.0]).is_err());
    }

    // A proportional-derivative controller on the dense task beats doing
    // nothing by a wide margin; the pair brackets sane learning curves.
    #[test]
    fn dense_pd_controller_beats_zero_action() {
        let run = |policy: &dyn Fn(&[f64]) -> [f64; 2]| -> f64 {
            let mut env = PointMass::dense();
            let mut obs = env.reset(17);
            let mut ret = 0.0;
            loop {
                let a = policy(&obs);
                let r = env.step(&a).unwrap();
                ret += r.reward;
                if r.episode_over() {
                    break;
                }
                obs = r.obs;
            }
            ret
        };
        let zero = run(&|_| [0.0, 0.0]);
        let pd = run(&|obs: &[f64]| {
            let to_goal = [obs[4], obs[5]];
            let vel = [obs[2], obs[3]];
            [
                (4.0 * to_goal[0] - 3.0 * vel[0]).clamp(-1.0, 1.0),
                (4.0 * to_goal[1] - 3.0 * vel[1]).clamp(-1.0, 1.0),
            ]
        });
        assert!(
            pd > zero + 50.0,
            "PD return {pd} should clearly beat zero-action return {zero}"
        );
        assert_abs_diff_eq!(zero, -200.0 * 1.0, epsilon = 30.0);
    }
}
