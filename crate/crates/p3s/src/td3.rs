//! One TD3 learner: twin critics, clipped-noise targets, delayed
//! actor/target updates, and an optional augmentation hook that adds a
//! quadratic pull toward an anchor policy to the actor loss.
//!
//! The actor outputs tanh values in `(-1, 1)^act_dim` which are mapped
//! affinely onto the action bounds. Exploration noise, target smoothing
//! noise and the noise clip all scale with the per-dimension half-range,
//! and policy distances are measured on the raw tanh outputs so the same
//! thresholds are meaningful across environments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::{Adam, BatchCache, GradBundle, Mlp, OutputActivation};
use crate::replay::{Minibatch, ReplayBuffer};

/// TD3 hyper-parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Td3Hyper {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Actor/target update interval in critic updates.
    pub policy_delay: u64,
    /// Exploration noise std, in units of the action half-range.
    pub expl_noise: f64,
    /// Target smoothing noise std, in units of the action half-range.
    pub target_noise: f64,
    /// Target noise clip, in units of the action half-range.
    pub noise_clip: f64,
    /// Per-learner steps of uniform random exploration without updates.
    pub t_initial: u64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
}

impl Default for Td3Hyper {
    fn default() -> Self {
        Td3Hyper {
            gamma: 0.99,
            tau: 0.005,
            lr: 1e-3,
            batch_size: 100,
            policy_delay: 2,
            expl_noise: 0.1,
            target_noise: 0.2,
            noise_clip: 0.5,
            t_initial: 250,
            hidden: vec![400, 300],
            buffer_capacity: 1_000_000,
        }
    }
}

impl Td3Hyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.gamma < 1.0
            && self.tau > 0.0
            && self.tau <= 1.0
            && self.lr >= 0.0
            && self.batch_size >= 1
            && self.policy_delay >= 1
            && self.expl_noise >= 0.0
            && self.target_noise >= 0.0
            && self.noise_clip >= 0.0
            && !self.hidden.is_empty()
            && self.buffer_capacity >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid TD3 hyper-parameters".into()))
        }
    }
}

/// Affine map between raw tanh outputs and environment actions.
#[derive(Debug, Clone)]
pub struct ActionScale {
    pub center: Vec<f64>,
    pub half: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionScale {
    pub fn from_spec(spec: &EnvSpec) -> ActionScale {
        let center = spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(l, h)| (l + h) / 2.0)
            .collect();
        let half = spec
            .action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(l, h)| (h - l) / 2.0)
            .collect();
        ActionScale {
            center,
            half,
            low: spec.action_low.clone(),
            high: spec.action_high.clone(),
        }
    }

}

/// Initial network set shared by every learner of a run.
#[derive(Debug, Clone)]
pub struct InitNets {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
}

impl InitNets {
    /// Build actor/critic networks for the given interface. Seeds are one
    /// per network so the three nets are independent draws.
    pub fn new(spec: &EnvSpec, hidden: &[usize], seeds: [u64; 3]) -> Result<InitNets> {
        let mut actor_sizes = vec![spec.obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(spec.act_dim);
        let mut critic_sizes = vec![spec.obs_dim + spec.act_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        Ok(InitNets {
            actor: Mlp::init(&actor_sizes, OutputActivation::Tanh, seeds[0])?,
            critic1: Mlp::init(&critic_sizes, OutputActivation::Linear, seeds[1])?,
            critic2: Mlp::init(&critic_sizes, OutputActivation::Linear, seeds[2])?,
        })
    }
}

/// Reusable buffers for one actor-loss gradient evaluation.
#[derive(Debug, Clone, Default)]
pub struct ActorWorkspace {
    cache_actor: BatchCache,
    cache_critic: BatchCache,
    cache_anchor: BatchCache,
    sa: Vec<f64>,
    act_buf: Vec<f64>,
    out_grad: Vec<f64>,
    input_grad: Vec<f64>,
    d_raw: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    batch: Minibatch,
    cache_actor: BatchCache,
    cache_c1: BatchCache,
    cache_c2: BatchCache,
    sa: Vec<f64>,
    y: Vec<f64>,
    act_buf: Vec<f64>,
    actor_ws: ActorWorkspace,
    grads: GradBundle,
}


/// Losses reported by one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: Option<f64>,
}

/// A single TD3 learner: online and target networks plus optimizer state,
/// a minibatch rng stream, and the update counter driving the delayed
/// actor/target schedule.
#[derive(Debug, Clone)]
pub struct Learner {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub adam_actor: Adam,
    pub adam_critic1: Adam,
    pub adam_critic2: Adam,
    pub scale: ActionScale,
    hyper: Td3Hyper,
    obs_dim: usize,
    act_dim: usize,
    sample_rng: ChaCha8Rng,
    update_count: u64,
    scratch: Scratch,
}

impl Learner {
    pub fn new(spec: &EnvSpec, hyper: Td3Hyper, init: &InitNets, sample_rng: ChaCha8Rng) -> Learner {
        Learner {
            actor: init.actor.clone(),
            critic1: init.critic1.clone(),
            critic2: init.critic2.clone(),
            actor_target: init.actor.clone(),
            critic1_target: init.critic1.clone(),
            critic2_target: init.critic2.clone(),
            adam_actor: Adam::new(&init.actor),
            adam_critic1: Adam::new(&init.critic1),
            adam_critic2: Adam::new(&init.critic2),
            scale: ActionScale::from_spec(spec),
            hyper,
            obs_dim: spec.obs_dim,
            act_dim: spec.act_dim,
            sample_rng,
            update_count: 0,
        scratch: Scratch::default(),
        }
    }

    pub fn hyper(&self) -> &Td3Hyper {
        &self.hyper
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn sample_rng(&self) -> &ChaCha8Rng {
        &self.sample_rng
    }

    /// Training action: uniform random during the initial exploration
    /// window, then the policy plus Gaussian noise, clipped to bounds.
    /// `t` is the learner's 0-based step counter.
    pub fn act_explore(&self, obs: &[f64], t: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if t < self.hyper.t_initial {
            return (0..self.act_dim)
                .map(|d| {
                    self.scale.low[d] + (self.scale.high[d] - self.scale.low[d]) * rng.random::<f64>()
                })
                .collect();
        }
        let raw = self.actor.forward(obs).expect("actor obs dim");
        (0..self.act_dim)
            .map(|d| {
                let noise: f64 = {
                    let z: f64 = rng.sample(StandardNormal);
                    z * self.hyper.expl_noise * self.scale.half[d]
                };
                (self.scale.center[d] + self.scale.half[d] * raw[d] + noise)
                    .clamp(self.scale.low[d], self.scale.high[d])
            })
            .collect()
    }

    /// Deterministic evaluation action.
    pub fn act_eval(&self, obs: &[f64]) -> Vec<f64> {
        let raw = self.actor.forward(obs).expect("actor obs dim");
        (0..self.act_dim)
            .map(|d| self.scale.center[d] + self.scale.half[d] * raw[d])
            .collect()
    }

    /// One training iteration: draw a minibatch, update both critics, and
    /// on every `policy_delay`-th call update the actor and all three
    /// target networks. `augmentation` is `(beta, anchor)`; the penalty
    /// pulls the actor's raw outputs toward the anchor's.
    pub fn train_step(
        &mut self,
        buffer: &ReplayBuffer,
        augmentation: Option<(f64, &Mlp)>,
    ) -> Result<StepLosses> {
        let batch_size = self.hyper.batch_size;
        let mut batch = std::mem::take(&mut self.scratch.batch);
        buffer.sample_into(&mut self.sample_rng, batch_size, &mut batch)?;

        self.compute_target(&batch)?;
        let (loss1, loss2) = self.critic_update(&batch)?;

        self.update_count += 1;
        let actor_loss = if self.update_count % self.hyper.policy_delay == 0 {
            let l = self.actor_update_on(&batch, augmentation)?;
            self.actor_target.soft_update_from(&self.actor, self.hyper.tau);
            self.critic1_target
                .soft_update_from(&self.critic1, self.hyper.tau);
            self.critic2_target
                .soft_update_from(&self.critic2, self.hyper.tau);
            Some(l)
        } else {
            None
        };
        self.scratch.batch = batch;
        Ok(StepLosses {
            critic1: loss1,
            critic2: loss2,
            actor: actor_loss,
        })
    }

    /// Bootstrap targets `y = r + gamma * (1 - done) * min_j Q'_j(s', a')`
    /// with `a'` the target policy action under clipped smoothing noise.
    /// Noise is drawn per batch element from the learner's stream, in
    /// row-major order. The result lands in scratch.
    fn compute_target(&mut self, batch: &Minibatch) -> Result<()> {
        let b = batch.len;
        let s = &mut self.scratch;
        self.actor_target
            .forward_batch(&batch.next_obs, b, &mut s.cache_actor);

        // scaled, smoothed, clipped next actions
        s.act_buf.clear();
        let raw = s.cache_actor.output();
        for i in 0..b {
            for d in 0..self.act_dim {
                let z: f64 = self.sample_rng.sample(StandardNormal);
                let half = self.scale.half[d];
                let noise = (z * self.hyper.target_noise * half)
                    .clamp(-self.hyper.noise_clip * half, self.hyper.noise_clip * half);
                let a = self.scale.center[d] + half * raw[i * self.act_dim + d] + noise;
                s.act_buf.push(a.clamp(self.scale.low[d], self.scale.high[d]));
            }
        }

        concat_rows(&batch.next_obs, &s.act_buf, self.obs_dim, self.act_dim, b, &mut s.sa);
        self.critic1_target.forward_batch(&s.sa, b, &mut s.cache_c1);
        self.critic2_target.forward_batch(&s.sa, b, &mut s.cache_c2);
        let q1 = s.cache_c1.output();
        let q2 = s.cache_c2.output();
        s.y.clear();
        for i in 0..b {
            let q = q1[i].min(q2[i]);
            s.y.push(batch.rewards[i] + self.hyper.gamma * (1.0 - batch.done[i]) * q);
        }
        Ok(())
    }

    /// One Adam step on each critic against the shared targets in scratch.
    fn critic_update(&mut self, batch: &Minibatch) -> Result<(f64, f64)> {
        let b = batch.len;
        let s = &mut self.scratch;
        concat_rows(&batch.obs, &batch.actions, self.obs_dim, self.act_dim, b, &mut s.sa);

        let mut losses = [0.0f64; 2];
        for (k, (critic, adam, cache)) in [
            (&mut self.critic1, &mut self.adam_critic1, &mut s.cache_c1),
            (&mut self.critic2, &mut self.adam_critic2, &mut s.cache_c2),
        ]
        .into_iter()
        .enumerate()
        {
            losses[k] = critic_loss_and_grad(critic, &s.sa, b, &s.y, cache, &mut s.grads)?;
            adam.step(critic, &s.grads, self.hyper.lr)?;
        }
        Ok((losses[0], losses[1]))
    }

    /// One Adam step on the actor minimizing
    /// `mean_b [ -Q1(s, pi(s)) + beta/2 * |pi_raw(s) - anchor_raw(s)|^2 ]`.
    fn actor_update_on(
        &mut self,
        batch: &Minibatch,
        augmentation: Option<(f64, &Mlp)>,
    ) -> Result<f64> {
        let s = &mut self.scratch;
        let loss = actor_loss_and_grad(
            &self.actor,
            &self.critic1,
            &batch.obs,
            batch.len,
            &self.scale,
            augmentation,
            &mut s.actor_ws,
            &mut s.grads,
        )?;
        self.adam_actor.step(&mut self.actor, &s.grads, self.hyper.lr)?;
        Ok(loss)
    }

    /// Copy every network, optimizer state and the update counter from
    /// another learner (rng streams and scratch stay local).
    pub fn adopt_state_of(&mut self, other: &Learner) {
        self.actor = other.actor.clone();
        self.critic1 = other.critic1.clone();
        self.critic2 = other.critic2.clone();
        self.actor_target = other.actor_target.clone();
        self.critic1_target = other.critic1_target.clone();
        self.critic2_target = other.critic2_target.clone();
        self.adam_actor = other.adam_actor.clone();
        self.adam_critic1 = other.adam_critic1.clone();
        self.adam_critic2 = other.adam_critic2.clone();
        self.update_count = other.update_count;
    }

    /// Raw (pre-scaling) policy outputs over a batch of observations.
    pub fn raw_policy_batch(&mut self, obs: &[f64], batch: usize) -> Vec<f64> {
        self.actor
            .forward_batch(obs, batch, &mut self.scratch.cache_actor);
        self.scratch.cache_actor.output().to_vec()
    }
}

/// Row-wise concatenation `[left_i | right_i]` into `out`.
fn concat_rows(
    left: &[f64],
    right: &[f64],
    left_dim: usize,
    right_dim: usize,
    rows: usize,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.reserve(rows * (left_dim + right_dim));
    for i in 0..rows {
        out.extend_from_slice(&left[i * left_dim..(i + 1) * left_dim]);
        out.extend_from_slice(&right[i * right_dim..(i + 1) * right_dim]);
    }
}

/// Critic loss `mean (y - Q(s,a))^2` and its exact gradient. This is the
/// computation `train_step` performs; gradient checks call it directly.
pub fn critic_loss_and_grad(
    critic: &Mlp,
    sa: &[f64],
    batch: usize,
    y: &[f64],
    cache: &mut BatchCache,
    grads: &mut GradBundle,
) -> Result<f64> {
    critic.forward_batch(sa, batch, cache);
    let q = cache.output();
    let loss = q
        .iter()
        .zip(y)
        .map(|(qi, yi)| (yi - qi) * (yi - qi))
        .sum::<f64>()
        / batch as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss"));
    }
    let out_grad: Vec<f64> = q
        .iter()
        .zip(y)
        .map(|(qi, yi)| 2.0 * (qi - yi) / batch as f64)
        .collect();
    grads.reset_like(critic);
    critic.backprop(cache, &out_grad, Some(grads), None);
    Ok(loss)
}

/// Actor loss
/// `mean_b [ -Q1(s, pi(s)) + beta/2 * |pi_raw(s) - anchor_raw(s)|^2 ]`
/// and its exact gradient with respect to the actor (critic frozen).
/// A `beta` of exactly zero takes the unaugmented path.
pub fn actor_loss_and_grad(
    actor: &Mlp,
    critic1: &Mlp,
    obs: &[f64],
    batch: usize,
    scale: &ActionScale,
    augmentation: Option<(f64, &Mlp)>,
    ws: &mut ActorWorkspace,
    grads: &mut GradBundle,
) -> Result<f64> {
    let act_dim = actor.output_dim();
    let obs_dim = actor.input_dim();
    let augmentation = augmentation.filter(|(beta, _)| *beta != 0.0);

    actor.forward_batch(obs, batch, &mut ws.cache_actor);
    let raw = ws.cache_actor.output();
    ws.act_buf.clear();
    for i in 0..batch {
        for d in 0..act_dim {
            ws.act_buf
                .push(scale.center[d] + scale.half[d] * raw[i * act_dim + d]);
        }
    }
    concat_rows(obs, &ws.act_buf, obs_dim, act_dim, batch, &mut ws.sa);
    critic1.forward_batch(&ws.sa, batch, &mut ws.cache_critic);
    let q = ws.cache_critic.output();
    let mut loss = -q.iter().sum::<f64>() / batch as f64;

    // dL/d(scaled action) through the frozen critic
    ws.out_grad.clear();
    ws.out_grad.resize(batch, -1.0 / batch as f64);
    critic1.backprop(
        &mut ws.cache_critic,
        &ws.out_grad,
        None,
        Some(&mut ws.input_grad),
    );

    // chain onto raw outputs; add the anchor pull where requested
    let raw = ws.cache_actor.output();
    ws.d_raw.clear();
    for i in 0..batch {
        for d in 0..act_dim {
            ws.d_raw
                .push(ws.input_grad[i * (obs_dim + act_dim) + obs_dim + d] * scale.half[d]);
        }
    }
    if let Some((beta, anchor)) = augmentation {
        anchor.forward_batch(obs, batch, &mut ws.cache_anchor);
        let anchor_raw = ws.cache_anchor.output();
        let mut penalty = 0.0;
        for (k, dr) in ws.d_raw.iter_mut().enumerate() {
            let diff = raw[k] - anchor_raw[k];
            penalty += diff * diff;
            *dr += beta * diff / batch as f64;
        }
        loss += beta / 2.0 * penalty / batch as f64;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("actor loss"));
    }
    grads.reset_like(actor);
    actor.backprop(&mut ws.cache_actor, &ws.d_raw, Some(grads), None);
    Ok(loss)
}

/// Scalar value of the critic loss at the given critic parameters (used
/// as the objective side of finite-difference checks).
pub fn critic_loss_value(critic: &Mlp, sa: &[f64], batch: usize, y: &[f64]) -> f64 {
    let mut cache = BatchCache::new();
    critic.forward_batch(sa, batch, &mut cache);
    cache
        .output()
        .iter()
        .zip(y)
        .map(|(qi, yi)| (yi - qi) * (yi - qi))
        .sum::<f64>()
        / batch as f64
}

/// Scalar value of the (optionally augmented) actor loss at the given
/// actor parameters, exactly as `train_step` computes it.
pub fn actor_loss_value(
    actor: &Mlp,
    critic1: &Mlp,
    obs: &[f64],
    batch: usize,
    scale: &ActionScale,
    augmentation: Option<(f64, &Mlp)>,
) -> f64 {
    let act_dim = actor.output_dim();
    let obs_dim = actor.input_dim();
    let mut cache = BatchCache::new();
    actor.forward_batch(obs, batch, &mut cache);
    let raw = cache.output().to_vec();
    let mut scaled = Vec::with_capacity(raw.len());
    for i in 0..batch {
        for d in 0..act_dim {
            scaled.push(scale.center[d] + scale.half[d] * raw[i * act_dim + d]);
        }
    }
    let mut sa = Vec::new();
    concat_rows(obs, &scaled, obs_dim, act_dim, batch, &mut sa);
    let mut ccache = BatchCache::new();
    critic1.forward_batch(&sa, batch, &mut ccache);
    let mut loss = -ccache.output().iter().sum::<f64>() / batch as f64;
    if let Some((beta, anchor)) = augmentation.filter(|(b, _)| *b != 0.0) {
        let mut acache = BatchCache::new();
        anchor.forward_batch(obs, batch, &mut acache);
        let penalty: f64 = raw
            .iter()
            .zip(acache.output())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        loss += beta / 2.0 * penalty / batch as f64;
    }
    loss
}
