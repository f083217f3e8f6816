//! The coordinator for population-guided search: best-learner selection,
//! frozen best-policy distribution, policy-distance estimation and the
//! adaptive penalty weight.
//!
//! The chief runs only at sync barriers, when every learner has completed
//! the same number of steps. It selects the learner with the best recent
//! episode returns, freezes a snapshot of its actor as the anchor for the
//! next window, estimates how far the population has spread from the
//! anchor (`d_spread`) and how fast each policy is moving (`d_change`),
//! and doubles or halves the penalty weight `beta` to steer the spread
//! toward the search radius `max(rho * d_change, d_min)`.

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::Mlp;
use crate::replay::ReplayBuffer;
use crate::td3::Learner;

/// Bounds applied to `beta` after each adaptation, preventing overflow
/// from repeated doubling.
pub const BETA_MIN: f64 = 1e-4;
pub const BETA_MAX: f64 = 1e4;

/// Population-search hyper-parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChiefHyper {
    /// Per-learner steps between syncs.
    pub sync_period: u64,
    /// Episodes averaged when scoring a learner.
    pub recent_episodes: usize,
    pub rho: f64,
    pub d_min: f64,
    /// Starting penalty weight. Zero is a supported ablation: guidance is
    /// disabled entirely and adaptation never turns it back on, which
    /// reduces the scheme to experience sharing only.
    pub beta_init: f64,
    /// States drawn from the replay buffer for distance estimates.
    pub distance_batch: usize,
}

impl Default for ChiefHyper {
    fn default() -> Self {
        ChiefHyper {
            sync_period: 250,
            recent_episodes: 10,
            rho: 2.0,
            d_min: 0.05,
            beta_init: 1.0,
            distance_batch: 1000,
        }
    }
}

impl ChiefHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sync_period >= 1
            && self.recent_episodes >= 1
            && self.rho > 0.0
            && self.d_min > 0.0
            && self.beta_init >= 0.0
            && self.distance_batch >= 1;
        if ok {
            Ok(())
        } else {
            Err(crate::error::Error::Config(
                "invalid population-search hyper-parameters".into(),
            ))
        }
    }
}

/// What one sync produced, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncRecord {
    pub best: usize,
    pub beta: f64,
    pub d_spread: f64,
    pub d_change: f64,
    pub learner_means: Vec<f64>,
}

/// Chief state between syncs: the incumbent best learner, the frozen
/// anchor snapshot, per-learner snapshots from the previous sync, the
/// current `beta` and the last distance estimates.
#[derive(Debug, Clone)]
pub struct Chief {
    hyper: ChiefHyper,
    n_learners: usize,
    best: usize,
    beta: f64,
    best_snapshot: Mlp,
    old_snapshots: Vec<Mlp>,
    d_spread: f64,
    d_change: f64,
    rng: ChaCha8Rng,
}

impl Chief {
    /// All learners start from the same parameters, so the initial anchor
    /// is that shared starting actor and the incumbent best is learner 0.
    pub fn new(n_learners: usize, hyper: ChiefHyper, init_actor: &Mlp, rng: ChaCha8Rng) -> Chief {
        let n = n_learners;
        Chief {
            hyper,
            n_learners,
            best: 0,
            beta: 1.0,
            best_snapshot: init_actor.clone(),
            old_snapshots: vec![init_actor.clone(); n],
            d_spread: 0.0,
            d_change: 0.0,
            rng,
        }
        .with_initial_beta()
    }

    fn with_initial_beta(mut self) -> Chief {
        self.beta = self.hyper.beta_init;
        self
    }

    pub fn best(&self) -> usize {
        self.best
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn best_snapshot(&self) -> &Mlp {
        &self.best_snapshot
    }

    pub fn distances(&self) -> (f64, f64) {
        (self.d_spread, self.d_change)
    }

    /// Augmentation for learner `i` during the current window: the best
    /// learner trains unaugmented, everyone else is pulled toward the
    /// frozen anchor with weight `beta`.
    pub fn augmentation_for(&self, learner: usize) -> Option<(f64, &Mlp)> {
        if learner == self.best || self.beta == 0.0 {
            None
        } else {
            Some((self.beta, &self.best_snapshot))
        }
    }

    /// Sync barrier: select the best learner, freeze its actor as the new
    /// anchor, estimate distances against the previous snapshots on a
    /// fresh state batch, adapt `beta`, and refresh the snapshots.
    pub fn sync(&mut self, learners: &mut [Learner], returns: &[Vec<f64>], buffer: &ReplayBuffer) -> SyncRecord {
        assert_eq!(learners.len(), self.n_learners);
        assert_eq!(returns.len(), self.n_learners);

        let learner_means: Vec<f64> = returns
            .iter()
            .map(|r| recent_mean(r, self.hyper.recent_episodes))
            .collect();
        self.best = select_best(returns, self.hyper.recent_episodes, self.best);
        self.best_snapshot = learners[self.best].actor.clone();

        if learners.len() > 1 && !buffer.is_empty() {
            let states = buffer
                .sample_obs(&mut self.rng, self.hyper.distance_batch)
                .expect("nonempty buffer");
            let (spread, change) = estimate_distances(
                learners,
                &self.old_snapshots,
                self.best,
                &states,
                self.hyper.distance_batch,
            );
            self.d_spread = spread;
            self.d_change = change;
            if self.beta != 0.0 {
                self.beta = adapt_beta(self.beta, spread, change, self.hyper.rho, self.hyper.d_min);
            }
        } else {
            self.d_spread = 0.0;
            self.d_change = 0.0;
        }

        for (snap, learner) in self.old_snapshots.iter_mut().zip(learners.iter()) {
            *snap = learner.actor.clone();
        }
        SyncRecord {
            best: self.best,
            beta: self.beta,
            d_spread: self.d_spread,
            d_change: self.d_change,
            learner_means,
        }
    }
}

fn recent_mean(returns: &[f64], recent: usize) -> f64 {
    if returns.is_empty() {
        return f64::NEG_INFINITY;
    }
    let tail = &returns[returns.len().saturating_sub(recent)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Argmax of mean recent returns. Learners with no completed episodes
/// score negative infinity; if nobody has a score the incumbent stays. On
/// ties the incumbent wins if it is among the maxima, otherwise the lowest
/// index does.
pub fn select_best(returns: &[Vec<f64>], recent: usize, incumbent: usize) -> usize {
    let means: Vec<f64> = returns.iter().map(|r| recent_mean(r, recent)).collect();
    let best_score = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if best_score == f64::NEG_INFINITY {
        return incumbent;
    }
    if means[incumbent] == best_score {
        return incumbent;
    }
    means
        .iter()
        .position(|&m| m == best_score)
        .unwrap_or(incumbent)
}

/// Mean-square-difference distance between two action vectors:
/// `0.5 * |a - b|^2`.
pub fn msd_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "msd dimension mismatch");
    0.5 * a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

/// Mean policy distances over non-best learners and a state batch:
/// spread is measured to the (new) best actor, change to each learner's
/// own previous-sync snapshot. Distances use raw policy outputs.
pub fn estimate_distances(
    learners: &mut [Learner],
    old_snapshots: &[Mlp],
    best: usize,
    states: &[f64],
    batch: usize,
) -> (f64, f64) {
    assert!(batch >= 1 && !states.is_empty());
    let best_raw = learners[best].raw_policy_batch(states, batch);
    let act_dim = best_raw.len() / batch;
    let mut spread_sum = 0.0;
    let mut change_sum = 0.0;
    let mut count = 0usize;
    for i in 0..learners.len() {
        if i == best {
            continue;
        }
        let cur = learners[i].raw_policy_batch(states, batch);
        let mut old_cache = crate::nn::BatchCache::new();
        old_snapshots[i].forward_batch(states, batch, &mut old_cache);
        let old = old_cache.output();
        for s in 0..batch {
            let row = s * act_dim..(s + 1) * act_dim;
            spread_sum += msd_distance(&cur[row.clone()], &best_raw[row.clone()]);
            change_sum += msd_distance(&cur[row.clone()], &old[row]);
        }
        count += batch;
    }
    if count == 0 {
        (0.0, 0.0)
    } else {
        (spread_sum / count as f64, change_sum / count as f64)
    }
}

/// Doubling/halving rule for the penalty weight: against the threshold
/// `T = max(rho * d_change, d_min)`, spread above `1.5 T` doubles `beta`,
/// spread below `T / 1.5` halves it, and the dead zone leaves it alone.
/// The result is clamped to `[1e-4, 1e4]`.
pub fn adapt_beta(beta: f64, d_spread: f64, d_change: f64, rho: f64, d_min: f64) -> f64 {
    let threshold = (rho * d_change).max(d_min);
    let next = if d_spread > 1.5 * threshold {
        2.0 * beta
    } else if d_spread < threshold / 1.5 {
        beta / 2.0
    } else {
        beta
    };
    next.clamp(BETA_MIN, BETA_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvSpec;
    use crate::nn::OutputActivation;
    use crate::td3::{InitNets, Td3Hyper};
    use rand::SeedableRng;

    #[test]
    fn select_best_takes_argmax_of_recent_means() {
        let hist = vec![vec![1.0], vec![3.0], vec![2.0], vec![2.5]];
        assert_eq!(select_best(&hist, 10, 0), 1);
    }

    #[test]
    fn select_best_tie_goes_to_incumbent() {
        let hist = vec![vec![1.0], vec![3.0], vec![2.0], vec![3.0]];
        assert_eq!(select_best(&hist, 10, 3), 3);
        assert_eq!(select_best(&hist, 10, 0), 1, "non-tied incumbent loses");
    }

    #[test]
    fn select_best_with_no_episodes_returns_incumbent() {
        let hist = vec![vec![], vec![], vec![]];
        assert_eq!(select_best(&hist, 10, 2), 2);
        // a single scored learner wins over empty ones
        let hist = vec![vec![], vec![-5.0], vec![]];
        assert_eq!(select_best(&hist, 10, 2), 1);
    }

    #[test]
    fn select_best_only_looks_at_recent_window() {
        let hist = vec![vec![100.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        assert_eq!(select_best(&hist, 2, 0), 1);
        assert_eq!(select_best(&hist, 3, 0), 0);
    }

    #[test]
    fn msd_matches_hand_computation() {
        assert_eq!(msd_distance(&[0.5, -0.5], &[0.5, -0.5]), 0.0);
        let d = msd_distance(&[0.3, -0.2], &[0.1, 0.2]);
        assert!((d - 0.1).abs() < 1e-15);
        assert_eq!(
            msd_distance(&[0.3, -0.2], &[0.1, 0.2]),
            msd_distance(&[0.1, 0.2], &[0.3, -0.2])
        );
    }

    #[test]
    fn adapt_beta_follows_the_rule() {
        // spread 0.5 > 1.5 * max(2*0.1, 0.02) = 0.3 -> double
        assert_eq!(adapt_beta(1.0, 0.5, 0.1, 2.0, 0.02), 2.0);
        // spread 0.1 < 0.2 / 1.5 -> halve
        assert_eq!(adapt_beta(1.0, 0.1, 0.1, 2.0, 0.02), 0.5);
        // dead zone keeps beta
        assert_eq!(adapt_beta(1.0, 0.25, 0.1, 2.0, 0.02), 1.0);
    }

    #[test]
    fn adapt_beta_clamps_at_both_ends() {
        let mut beta = 1.0;
        for _ in 0..100 {
            beta = adapt_beta(beta, 1e9, 0.0, 2.0, 0.01);
        }
        assert_eq!(beta, BETA_MAX);
        for _ in 0..200 {
            beta = adapt_beta(beta, 0.0, 0.0, 2.0, 0.01);
        }
        assert_eq!(beta, BETA_MIN);
    }

    #[test]
    fn beta_is_a_pure_function_of_the_distance_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::Rng;
        let stream: Vec<(f64, f64)> = (0..500)
            .map(|_| (rng.random::<f64>() * 0.4, rng.random::<f64>() * 0.2))
            .collect();
        let replay = |stream: &[(f64, f64)]| -> Vec<f64> {
            let mut beta = 1.0;
            stream
                .iter()
                .map(|&(s, c)| {
                    beta = adapt_beta(beta, s, c, 2.0, 0.05);
                    beta
                })
                .collect()
        };
        assert_eq!(replay(&stream), replay(&stream));
    }

    fn population(n: usize) -> (Vec<Learner>, ReplayBuffer, Chief) {
        let spec = EnvSpec::new(3, 2, vec![-1.0, -1.0], vec![1.0, 1.0], 50);
        let hyper = Td3Hyper {
            hidden: vec![8],
            batch_size: 4,
            buffer_capacity: 256,
            ..Td3Hyper::default()
        };
        let init = InitNets::new(&spec, &hyper.hidden, [1, 2, 3]).unwrap();
        let learners: Vec<Learner> = (0..n)
            .map(|i| {
                Learner::new(
                    &spec,
                    hyper.clone(),
                    &init,
                    ChaCha8Rng::seed_from_u64(50 + i as u64),
                )
            })
            .collect();
        let mut buffer = ReplayBuffer::new(256, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        use rand::Rng;
        for _ in 0..64 {
            let v: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            buffer
                .append(&crate::replay::Transition {
                    obs: v[0..3].to_vec(),
                    action: v[3..5].to_vec(),
                    reward: v[5],
                    next_obs: v[6..9].to_vec(),
                    done: 0.0,
                })
                .unwrap();
        }
        let chief = Chief::new(
            n,
            ChiefHyper {
                distance_batch: 32,
                ..ChiefHyper::default()
            },
            &init.actor,
            ChaCha8Rng::seed_from_u64(77),
        );
        (learners, buffer, chief)
    }

    #[test]
    fn identical_population_has_zero_spread_and_change() {
        let (mut learners, buffer, _) = population(3);
        let states = buffer
            .sample_obs(&mut ChaCha8Rng::seed_from_u64(1), 16)
            .unwrap();
        let snapshots: Vec<Mlp> = learners.iter().map(|l| l.actor.clone()).collect();
        let (spread, change) = estimate_distances(&mut learners, &snapshots, 0, &states, 16);
        assert_eq!(spread, 0.0);
        assert_eq!(change, 0.0);
    }

    #[test]
    fn two_learners_reduce_to_the_single_pair_distance() {
        let (mut learners, buffer, _) = population(2);
        learners[1].actor = Mlp::init(&[3, 8, 2], OutputActivation::Tanh, 999).unwrap();
        let states = buffer
            .sample_obs(&mut ChaCha8Rng::seed_from_u64(2), 8)
            .unwrap();
        let snapshots: Vec<Mlp> = learners.iter().map(|l| l.actor.clone()).collect();
        let (spread, _) = estimate_distances(&mut learners, &snapshots, 0, &states, 8);

        // by hand over the one non-best learner
        let a = learners[1].raw_policy_batch(&states, 8);
        let b = learners[0].raw_policy_batch(&states, 8);
        let mut expect = 0.0;
        for s in 0..8 {
            expect += msd_distance(&a[s * 2..s * 2 + 2], &b[s * 2..s * 2 + 2]);
        }
        expect /= 8.0;
        assert!((spread - expect).abs() < 1e-15);
    }

    #[test]
    fn sync_selects_freezes_and_unaugments_the_best() {
        let (mut learners, buffer, mut chief) = population(2);
        learners[1].actor = Mlp::init(&[3, 8, 2], OutputActivation::Tanh, 321).unwrap();
        let returns = vec![vec![1.0, 1.0], vec![5.0, 5.0]];
        let record = chief.sync(&mut learners, &returns, &buffer);
        assert_eq!(record.best, 1);
        assert!(chief.augmentation_for(1).is_none());
        let (beta, anchor) = chief.augmentation_for(0).unwrap();
        assert_eq!(beta, chief.beta());
        assert_eq!(anchor, &learners[1].actor);
        assert_eq!(record.learner_means, vec![1.0, 5.0]);
    }

    #[test]
    fn anchor_is_frozen_against_further_training() {
        let (mut learners, buffer, mut chief) = population(2);
        let returns = vec![vec![2.0], vec![1.0]];
        chief.sync(&mut learners, &returns, &buffer);
        let anchor_before = chief.best_snapshot().clone();
        // mutate the best learner's live actor; the snapshot must not move
        learners[0].actor.set_flat(0, 123.456);
        assert_eq!(chief.best_snapshot(), &anchor_before);
    }

    #[test]
    fn change_is_zero_immediately_after_a_sync() {
        let (mut learners, buffer, mut chief) = population(3);
        let returns = vec![vec![1.0], vec![2.0], vec![0.5]];
        chief.sync(&mut learners, &returns, &buffer);
        // no training in between: next sync sees zero policy change
        let record = chief.sync(&mut learners, &returns, &buffer);
        assert_eq!(record.d_change, 0.0);
    }

    #[test]
    fn beta_trace_matches_scalar_simulation_through_syncs() {
        // feed a synthetic distance stream through adapt_beta and compare
        // with an independently hand-tracked beta sequence
        let stream = [
            (0.50, 0.10),
            (0.18, 0.10),
            (0.02, 0.10),
            (0.30, 0.01),
            (0.29, 0.10),
        ];
        let mut beta = 1.0;
        let expected = [2.0, 2.0, 1.0, 2.0, 2.0];
        for ((s, c), want) in stream.iter().zip(expected) {
            beta = adapt_beta(beta, *s, *c, 2.0, 0.05);
            assert_eq!(beta, want);
        }
    }
}
