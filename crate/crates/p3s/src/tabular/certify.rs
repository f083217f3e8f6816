//! End-to-end certification of the improvement guarantee on one instance
//! and over corpora of random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    augmented_minimizer, check_guide_dominance, check_spread_requirement, check_q_difference_bound,
    derive_rho_d, improvement_gap_all, kl_categorical, policy_evaluation, random_mdp,
    random_policy, TabularMdp, TabularPolicy,
};
use crate::error::Result;

/// Outcome of certifying one instance. Failed inequalities are recorded,
/// not raised; the corpus runner treats any violation as fatal.
#[derive(Debug, Clone)]
pub struct CertReport {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub beta: f64,
    pub c: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub d: f64,
    /// The guide was at least as good as the old policy under `Q_old`,
    /// at every state.
    pub guide_dominates: bool,
    /// The new policy kept the required distance from the guide at every
    /// state.
    pub spread_holds: bool,
    /// `Q_new >= Q_guide + gap` pointwise (checked under guide dominance).
    pub gap_bound_ok: Option<bool>,
    /// `Q_new >= Q_guide` pointwise (checked when both conditions hold).
    pub dominance_ok: Option<bool>,
    /// `E_new[Q_old] >= E_old[Q_old]` per state (checked under guide
    /// dominance).
    pub one_step_improvement_ok: Option<bool>,
    /// `Q_new >= Q_old` pointwise (checked under guide dominance).
    pub dominates_old_ok: Option<bool>,
    /// Coupling bound between `Q_new` and `Q_old`.
    pub q_diff_bound_ok: bool,
    /// Smallest slack of inequality (a) over all `(s, a)`.
    pub min_margin_gap: f64,
    /// Smallest slack of inequality (b) over all `(s, a)`.
    pub min_margin_plain: f64,
}

impl CertReport {
    pub fn violated(&self) -> bool {
        self.gap_bound_ok == Some(false)
            || self.dominance_ok == Some(false)
            || self.one_step_improvement_ok == Some(false)
            || self.dominates_old_ok == Some(false)
            || !self.q_diff_bound_ok
    }

    pub fn csv_header() -> &'static str {
        "instance,n_states,n_actions,gamma,beta,c,epsilon,rho,d,guide_dominates,spread_holds,gap_bound,dominance,one_step_improvement,dominates_old,q_diff_bound,min_margin_gap,min_margin_plain"
    }

    pub fn csv_row(&self, instance: usize) -> String {
        let opt = |o: Option<bool>| match o {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            instance,
            self.n_states,
            self.n_actions,
            self.gamma,
            self.beta,
            self.c,
            self.epsilon,
            self.rho,
            self.d,
            self.guide_dominates as u8,
            self.spread_holds as u8,
            opt(self.gap_bound_ok),
            opt(self.dominance_ok),
            opt(self.one_step_improvement_ok),
            opt(self.dominates_old_ok),
            self.q_diff_bound_ok as u8,
            self.min_margin_gap,
            self.min_margin_plain,
        )
    }
}

/// Certify the full improvement chain on one instance.
///
/// The new policy is the exact minimizer of the augmented objective built
/// from `Q^{pi_old}`; `epsilon` is `max |A^{pi_old}|` and `(rho, d)` are
/// derived from `(epsilon, gamma, beta, C)`. When the guide dominates the
/// old policy at every state, the gap-augmented bound must hold pointwise;
/// when the spread requirement holds as well, the new policy must dominate
/// the guide outright.
pub fn certify_improvement(
    mdp: &TabularMdp,
    pi_old: &TabularPolicy,
    guide: &TabularPolicy,
    beta: f64,
    c: f64,
    tolerance: f64,
) -> Result<CertReport> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let eval_old = policy_evaluation(mdp, pi_old)?;
    let pi_new = augmented_minimizer(&eval_old.q, guide, beta);
    let epsilon = eval_old.max_abs_advantage();
    let (rho, d) = derive_rho_d(epsilon, mdp.gamma, beta, c);

    let dominance_flags = check_guide_dominance(&eval_old.q, guide, pi_old, tolerance);
    let guide_dominates = dominance_flags.iter().all(|&b| b);
    let spread_flags = check_spread_requirement(&pi_new, guide, pi_old, rho, d, tolerance);
    let spread_holds = spread_flags.iter().all(|&b| b);

    let eval_new = policy_evaluation(mdp, &pi_new)?;
    let eval_guide = policy_evaluation(mdp, guide)?;

    let kl_max_change = (0..ns)
        .map(|s| kl_categorical(pi_new.row(s), pi_old.row(s)))
        .fold(0.0f64, f64::max);
    let radius = (rho * kl_max_change).max(d);
    let delta: Vec<f64> = (0..ns)
        .map(|s| kl_categorical(pi_new.row(s), guide.row(s)) - radius)
        .collect();
    let gap = improvement_gap_all(mdp, guide, &delta, beta)?;

    let mut min_margin_gap = f64::INFINITY;
    let mut min_margin_plain = f64::INFINITY;
    for i in 0..ns * na {
        min_margin_gap = min_margin_gap.min(eval_new.q[i] - eval_guide.q[i] - gap[i]);
        min_margin_plain = min_margin_plain.min(eval_new.q[i] - eval_guide.q[i]);
    }

    let gap_bound_ok = guide_dominates.then(|| min_margin_gap >= -tolerance);
    let dominance_ok = (guide_dominates && spread_holds).then(|| min_margin_plain >= -tolerance);
    let one_step_improvement_ok = guide_dominates.then(|| {
        (0..ns).all(|s| {
            let qrow = &eval_old.q[s * na..(s + 1) * na];
            let lhs: f64 = pi_new.row(s).iter().zip(qrow).map(|(p, q)| p * q).sum();
            let rhs: f64 = pi_old.row(s).iter().zip(qrow).map(|(p, q)| p * q).sum();
            lhs >= rhs - tolerance
        })
    });
    let dominates_old_ok = guide_dominates.then(|| {
        eval_new
            .q
            .iter()
            .zip(&eval_old.q)
            .all(|(new, old)| new >= &(old - tolerance))
    });
    let q_diff_bound_ok = check_q_difference_bound(mdp, &pi_new, pi_old, c, tolerance)?;

    Ok(CertReport {
        n_states: ns,
        n_actions: na,
        gamma: mdp.gamma,
        beta,
        c,
        epsilon,
        rho,
        d,
        guide_dominates,
        spread_holds,
        gap_bound_ok,
        dominance_ok,
        one_step_improvement_ok,
        dominates_old_ok,
        q_diff_bound_ok,
        min_margin_gap,
        min_margin_plain,
    })
}

/// Aggregate counts over a certification corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSummary {
    pub instances: usize,
    pub guide_dominance_held: usize,
    pub spread_held: usize,
    pub both_held: usize,
    pub gap_bound_checked: usize,
    pub dominance_checked: usize,
    pub violations: usize,
}

impl CorpusSummary {
    pub fn render(&self) -> String {
        format!(
            "instances          {:>8}\n\
             guide dominance    {:>8}\n\
             spread requirement {:>8}\n\
             both conditions    {:>8}\n\
             gap bound checked  {:>8}\n\
             dominance checked  {:>8}\n\
             violations         {:>8}\n",
            self.instances,
            self.guide_dominance_held,
            self.spread_held,
            self.both_held,
            self.gap_bound_checked,
            self.dominance_checked,
            self.violations
        )
    }
}

/// Certify `instances` random MDPs (up to 4 states, 3 actions; random
/// discount, beta and C). Guides rotate between the exact greedy policy,
/// the old policy itself, and an unrelated random policy, so both
/// assumption-satisfying and assumption-violating instances occur.
pub fn certify_corpus(
    instances: usize,
    seed: u64,
    tolerance: f64,
) -> Result<(CorpusSummary, Vec<CertReport>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = CorpusSummary::default();
    let mut reports = Vec::with_capacity(instances);
    for k in 0..instances {
        let n_states = 1 + rng.random_range(0..4usize);
        let n_actions = 1 + rng.random_range(0..3usize);
        let gamma = 0.3 + 0.65 * rng.random::<f64>();
        let beta = 0.1 + 1.9 * rng.random::<f64>();
        let c = 0.5 + 1.5 * rng.random::<f64>();
        let mdp_seed = rng.random::<u64>();
        let policy_seed = rng.random::<u64>();
        let mdp = random_mdp(mdp_seed, n_states, n_actions, 1.0, gamma);
        let pi_old = random_policy(policy_seed, n_states, n_actions);
        let guide = match k % 3 {
            0 => {
                let q_old = policy_evaluation(&mdp, &pi_old)?.q;
                TabularPolicy::greedy(&q_old, n_states, n_actions)
            }
            1 => pi_old.clone(),
            _ => random_policy(rng.random::<u64>(), n_states, n_actions),
        };
        let report = certify_improvement(&mdp, &pi_old, &guide, beta, c, tolerance)?;
        summary.instances += 1;
        summary.guide_dominance_held += report.guide_dominates as usize;
        summary.spread_held += report.spread_holds as usize;
        summary.both_held += (report.guide_dominates && report.spread_holds) as usize;
        summary.gap_bound_checked += report.gap_bound_ok.is_some() as usize;
        summary.dominance_checked += report.dominance_ok.is_some() as usize;
        summary.violations += report.violated() as usize;
        reports.push(report);
    }
    Ok((summary, reports))
}
