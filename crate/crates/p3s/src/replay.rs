//! Shared experience replay: bounded FIFO storage with uniform sampling.
//!
//! One buffer instance is shared by all learners. The lockstep contract is
//! that every append of a global timestep happens (in learner-index order)
//! before any learner samples, which makes buffer contents a pure function
//! of (seed, step count). Sampling is read-only, so learners can draw
//! minibatches in parallel, each from its own rng stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One experience tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// 1.0 on genuine termination, 0.0 otherwise (including truncation).
    pub done: f64,
}

/// Flat column storage for a sampled minibatch, reused across draws.
#[derive(Debug, Clone, Default)]
pub struct Minibatch {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub done: Vec<f64>,
    pub len: usize,
}

/// Bounded ring buffer over transitions, stored column-wise.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    done: Vec<f64>,
    cursor: usize,
    len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> ReplayBuffer {
        assert!(capacity >= 1 && obs_dim >= 1 && act_dim >= 1);
        ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            done: Vec::new(),
            cursor: 0,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append one transition, evicting the oldest once full.
    pub fn append(&mut self, t: &Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim || t.next_obs.len() != self.obs_dim {
            return Err(Error::DimMismatch {
                expected: self.obs_dim,
                got: t.obs.len(),
                context: "replay observation",
            });
        }
        if t.action.len() != self.act_dim {
            return Err(Error::DimMismatch {
                expected: self.act_dim,
                got: t.action.len(),
                context: "replay action",
            });
        }
        let slot = self.cursor;
        if self.len < self.capacity {
            // grow column storage lazily up to capacity
            self.obs.extend_from_slice(&t.obs);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.done.push(t.done);
            self.len += 1;
        } else {
            self.obs[slot * self.obs_dim..(slot + 1) * self.obs_dim].copy_from_slice(&t.obs);
            self.actions[slot * self.act_dim..(slot + 1) * self.act_dim]
                .copy_from_slice(&t.action);
            self.rewards[slot] = t.reward;
            self.next_obs[slot * self.obs_dim..(slot + 1) * self.obs_dim]
                .copy_from_slice(&t.next_obs);
            self.done[slot] = t.done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, index: usize) -> Transition {
        assert!(index < self.len);
        Transition {
            obs: self.obs[index * self.obs_dim..(index + 1) * self.obs_dim].to_vec(),
            action: self.actions[index * self.act_dim..(index + 1) * self.act_dim].to_vec(),
            reward: self.rewards[index],
            next_obs: self.next_obs[index * self.obs_dim..(index + 1) * self.obs_dim].to_vec(),
            done: self.done[index],
        }
    }

    /// Draw `batch` transitions uniformly with replacement into `out`.
    pub fn sample_into(
        &self,
        rng: &mut ChaCha8Rng,
        batch: usize,
        out: &mut Minibatch,
    ) -> Result<()> {
        if self.len == 0 {
            return Err(Error::EmptyBuffer);
        }
        assert!(batch >= 1);
        out.len = batch;
        out.obs.clear();
        out.actions.clear();
        out.rewards.clear();
        out.next_obs.clear();
        out.done.clear();
        for _ in 0..batch {
            let i = rng.random_range(0..self.len);
            out.obs
                .extend_from_slice(&self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]);
            out.actions
                .extend_from_slice(&self.actions[i * self.act_dim..(i + 1) * self.act_dim]);
            out.rewards.push(self.rewards[i]);
            out.next_obs
                .extend_from_slice(&self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim]);
            out.done.push(self.done[i]);
        }
        Ok(())
    }

    /// Draw `batch` observations uniformly with replacement (the state
    /// batch used for policy-distance estimates).
    pub fn sample_obs(&self, rng: &mut ChaCha8Rng, batch: usize) -> Result<Vec<f64>> {
        if self.len == 0 {
            return Err(Error::EmptyBuffer);
        }
        let mut out = Vec::with_capacity(batch * self.obs_dim);
        for _ in 0..batch {
            let i = rng.random_range(0..self.len);
            out.extend_from_slice(&self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]);
        }
        Ok(out)
    }
}
