//! Exact tabular certification of the soft-guidance improvement guarantee.
//!
//! For a finite MDP the whole argument can be checked with linear algebra:
//! exact policy evaluation by solving the Bellman system, the closed-form
//! minimizer of the KL-augmented policy objective, the two conditions
//! behind the guarantee, and the improvement-gap term computed from the
//! discounted occupancy of the guiding policy. [`certify_improvement`] runs
//! the full chain on one instance; [`certify_corpus`] sweeps random MDPs
//! and counts violations, which must be zero.
//!
//! Everything here is for stochastic tabular policies. The training path
//! uses deterministic actors with a mean-square distance; the KL setting
//! lives only in this module.

mod certify;

pub use certify::{certify_corpus, certify_improvement, CertReport, CorpusSummary};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Finite MDP: dense transition tensor, reward table and discount.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[(s * n_actions + a) * n_states + s2]`, rows sum to 1.
    pub transitions: Vec<f64>,
    /// `rewards[s * n_actions + a]`.
    pub rewards: Vec<f64>,
    pub gamma: f64,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
    ) -> Result<TabularMdp> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("MDP needs at least one state and action".into()));
        }
        if transitions.len() != n_states * n_actions * n_states
            || rewards.len() != n_states * n_actions
        {
            return Err(Error::Config("MDP tensor sizes are inconsistent".into()));
        }
        if !(0.0..1.0).contains(&gamma) || gamma <= 0.0 {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        let mdp = TabularMdp {
            n_states,
            n_actions,
            transitions,
            rewards,
            gamma,
        };
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = mdp.transition_row(s, a);
                if row.iter().any(|&p| p < 0.0) {
                    return Err(Error::Config("negative transition probability".into()));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "transition row ({s},{a}) sums to {sum}"
                    )));
                }
            }
        }
        if mdp.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::Config("non-finite reward".into()));
        }
        Ok(mdp)
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transitions[base..base + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }
}

/// Stochastic tabular policy; rows are per-state action distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<TabularPolicy> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Config("policy table size mismatch".into()));
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            if row.iter().any(|&p| p < 0.0) {
                return Err(Error::Config("negative policy probability".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("policy row {s} sums to {sum}")));
            }
        }
        Ok(TabularPolicy {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> TabularPolicy {
        TabularPolicy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Deterministic policy putting all mass on each state's argmax of `q`
    /// (lowest index on ties).
    pub fn greedy(q: &[f64], n_states: usize, n_actions: usize) -> TabularPolicy {
        let mut probs = vec![0.0; n_states * n_actions];
        for s in 0..n_states {
            let row = &q[s * n_actions..(s + 1) * n_actions];
            let mut best = 0;
            for a in 1..n_actions {
                if row[a] > row[best] {
                    best = a;
                }
            }
            probs[s * n_actions + best] = 1.0;
        }
        TabularPolicy {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

/// Exact evaluation artifacts: Q, state values and advantages.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub advantage: Vec<f64>,
}

impl EvalResult {
    pub fn max_abs_advantage(&self) -> f64 {
        self.advantage.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }
}

/// Exact Q of a policy by solving `(I - gamma * P Pi) q = r` directly.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<EvalResult> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    assert_eq!(policy.n_states, ns);
    assert_eq!(policy.n_actions, na);
    let n = ns * na;
    let mut system = DMatrix::<f64>::identity(n, n);
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            let p = mdp.transition_row(s, a);
            for s2 in 0..ns {
                for a2 in 0..na {
                    system[(row, s2 * na + a2)] -= mdp.gamma * p[s2] * policy.probs[s2 * na + a2];
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(&mdp.rewards);
    let q = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Bellman system"))?;
    let q: Vec<f64> = q.iter().copied().collect();
    let mut v = vec![0.0; ns];
    for s in 0..ns {
        v[s] = (0..na).map(|a| policy.probs[s * na + a] * q[s * na + a]).sum();
    }
    let advantage: Vec<f64> = (0..n).map(|i| q[i] - v[i / na]).collect();
    Ok(EvalResult { q, v, advantage })
}

/// `KL(p || q)`; positive infinity when `p` has mass outside `q`'s support.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        sum += pi * (pi / qi).ln();
    }
    sum
}

/// Total variation distance `0.5 * sum |p - q|`.
pub fn tv_categorical(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Per-state closed-form minimizer of
/// `E_{a ~ pi}[-q(s,a)] + beta * KL(pi || anchor)`:
/// `pi(a|s) proportional to anchor(a|s) * exp(q(s,a) / beta)`.
pub fn augmented_minimizer(q: &[f64], anchor: &TabularPolicy, beta: f64) -> TabularPolicy {
    assert!(beta > 0.0, "beta must be positive");
    let (ns, na) = (anchor.n_states, anchor.n_actions);
    assert_eq!(q.len(), ns * na);
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        let qrow = &q[s * na..(s + 1) * na];
        let arow = anchor.row(s);
        let qmax = qrow
            .iter()
            .zip(arow)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&qv, _)| qv)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in 0..na {
            let w = if arow[a] > 0.0 {
                arow[a] * ((qrow[a] - qmax) / beta).exp()
            } else {
                0.0
            };
            probs[s * na + a] = w;
            total += w;
        }
        assert!(total > 0.0, "anchor policy has an all-zero row");
        for a in 0..na {
            probs[s * na + a] /= total;
        }
    }
    TabularPolicy {
        n_states: ns,
        n_actions: na,
        probs,
    }
}

/// Guide-dominance condition, per state: drawing the first action from
/// the guide is at least as good under `Q^{pi_old}` as following `pi_old`.
pub fn check_guide_dominance(
    q_old: &[f64],
    guide: &TabularPolicy,
    old: &TabularPolicy,
    tolerance: f64,
) -> Vec<bool> {
    let (ns, na) = (old.n_states, old.n_actions);
    (0..ns)
        .map(|s| {
            let qrow = &q_old[s * na..(s + 1) * na];
            let lhs: f64 = guide.row(s).iter().zip(qrow).map(|(p, q)| p * q).sum();
            let rhs: f64 = old.row(s).iter().zip(qrow).map(|(p, q)| p * q).sum();
            lhs >= rhs - tolerance
        })
        .collect()
}

/// Constants from the coupling bound: `rho = 2 eps gamma C / (beta (1 - gamma))`
/// and `d = 2 eps gamma / (beta (1 - gamma) C)`.
pub fn derive_rho_d(epsilon: f64, gamma: f64, beta: f64, c: f64) -> (f64, f64) {
    let base = 2.0 * epsilon * gamma / (beta * (1.0 - gamma));
    (base * c, base / c)
}

/// Spread condition, per state: the new policy keeps at least the search
/// radius `max(rho * max_s' KL(new || old), d)` away from the guide.
pub fn check_spread_requirement(
    new: &TabularPolicy,
    guide: &TabularPolicy,
    old: &TabularPolicy,
    rho: f64,
    d: f64,
    tolerance: f64,
) -> Vec<bool> {
    let ns = new.n_states;
    let kl_max_change = (0..ns)
        .map(|s| kl_categorical(new.row(s), old.row(s)))
        .fold(0.0f64, f64::max);
    let radius = (rho * kl_max_change).max(d);
    (0..ns)
        .map(|s| kl_categorical(new.row(s), guide.row(s)) >= radius - tolerance)
        .collect()
}

/// Expected discounted sum of `delta` along trajectories that leave
/// `(s, a)` and then follow `guide`:
/// `beta * E[sum_{k >= t+1} gamma^{k-t} delta(s_k)]` for every `(s, a)`,
/// computed exactly from the occupancy system `u = delta + gamma P_g u`.
pub fn improvement_gap_all(
    mdp: &TabularMdp,
    guide: &TabularPolicy,
    delta: &[f64],
    beta: f64,
) -> Result<Vec<f64>> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    assert_eq!(delta.len(), ns);
    let mut system = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for a in 0..na {
            let p = mdp.transition_row(s, a);
            let w = guide.probs[s * na + a];
            for s2 in 0..ns {
                system[(s, s2)] -= mdp.gamma * w * p[s2];
            }
        }
    }
    let rhs = DVector::from_column_slice(delta);
    let u = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("occupancy system"))?;
    let mut gap = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let p = mdp.transition_row(s, a);
            let expect: f64 = (0..ns).map(|s2| p[s2] * u[s2]).sum();
            gap[s * na + a] = beta * mdp.gamma * expect;
        }
    }
    Ok(gap)
}

/// Single-entry accessor for the gap term.
pub fn improvement_gap(
    mdp: &TabularMdp,
    guide: &TabularPolicy,
    delta: &[f64],
    beta: f64,
    s: usize,
    a: usize,
) -> Result<f64> {
    Ok(improvement_gap_all(mdp, guide, delta, beta)?[s * mdp.n_actions + a])
}

/// Random MDP with exponential-normalized transition rows and uniform
/// rewards in `[-reward_scale, reward_scale]`.
pub fn random_mdp(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    reward_scale: f64,
    gamma: f64,
) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = vec![0.0; n_states * n_actions * n_states];
    for row in transitions.chunks_exact_mut(n_states) {
        let mut sum = 0.0;
        for p in row.iter_mut() {
            *p = -(1.0 - rng.random::<f64>()).ln();
            sum += *p;
        }
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    let rewards = (0..n_states * n_actions)
        .map(|_| (2.0 * rng.random::<f64>() - 1.0) * reward_scale)
        .collect();
    TabularMdp::new(n_states, n_actions, transitions, rewards, gamma)
        .expect("generated MDP is valid by construction")
}

/// Random strictly-positive policy (exponential-normalized rows).
pub fn random_policy(seed: u64, n_states: usize, n_actions: usize) -> TabularPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = vec![0.0; n_states * n_actions];
    for row in probs.chunks_exact_mut(n_actions) {
        let mut sum = 0.0;
        for p in row.iter_mut() {
            *p = -(1.0 - rng.random::<f64>()).ln();
            sum += *p;
        }
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    TabularPolicy {
        n_states,
        n_actions,
        probs,
    }
}

/// One side of the coupling bound, checkable for any policy pair:
/// `|Q^pi - Q^pi'| <= 2 eps gamma / (1 - gamma) * max(C alpha^2, 1/C)`
/// with `alpha = max_s TV(pi(s), pi'(s))` and `eps = max |A^pi|`.
pub fn check_q_difference_bound(
    mdp: &TabularMdp,
    pi: &TabularPolicy,
    pi_prime: &TabularPolicy,
    c: f64,
    tolerance: f64,
) -> Result<bool> {
    let eval_pi = policy_evaluation(mdp, pi)?;
    let eval_prime = policy_evaluation(mdp, pi_prime)?;
    let epsilon = eval_pi.max_abs_advantage();
    let alpha = (0..mdp.n_states)
        .map(|s| tv_categorical(pi.row(s), pi_prime.row(s)))
        .fold(0.0f64, f64::max);
    let bound = 2.0 * epsilon * mdp.gamma / (1.0 - mdp.gamma) * (c * alpha * alpha).max(1.0 / c);
    Ok(eval_pi
        .q
        .iter()
        .zip(&eval_prime.q)
        .all(|(a, b)| (a - b).abs() <= bound + tolerance))
}
