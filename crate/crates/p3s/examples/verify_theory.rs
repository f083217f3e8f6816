//! Certify the improvement guarantee exactly on random tabular MDPs, then
//! walk through one instance by hand.
//!
//! ```bash
//! cargo run --release --example verify_theory
//! ```

use p3s::tabular::{
    augmented_minimizer, certify_corpus, certify_improvement, derive_rho_d, policy_evaluation,
    random_mdp, random_policy, TabularPolicy,
};

fn main() {
    let (summary, _) = certify_corpus(1000, 0, 1e-9).unwrap();
    println!("certification over 1000 random MDPs:\n{}", summary.render());
    assert_eq!(summary.violations, 0);

    // one instance, spelled out
    let mdp = random_mdp(5, 3, 2, 1.0, 0.8);
    let pi_old = random_policy(6, 3, 2);
    let eval_old = policy_evaluation(&mdp, &pi_old).unwrap();
    let guide = TabularPolicy::greedy(&eval_old.q, 3, 2);
    let beta = 0.5;

    let pi_new = augmented_minimizer(&eval_old.q, &guide, beta);
    let epsilon = eval_old.max_abs_advantage();
    let (rho, d) = derive_rho_d(epsilon, mdp.gamma, beta, 1.0);
    println!("worked instance: 3 states, 2 actions, gamma = {}", mdp.gamma);
    println!("  max |advantage| of the old policy: {epsilon:.4}");
    println!("  derived (rho, d) = ({rho:.4}, {d:.4})");
    for s in 0..3 {
        println!(
            "  state {s}: old {:?} -> new {:?} (guide {:?})",
            round2(pi_old.row(s)),
            round2(pi_new.row(s)),
            round2(guide.row(s)),
        );
    }

    let report = certify_improvement(&mdp, &pi_old, &guide, beta, 1.0, 1e-9).unwrap();
    println!(
        "  guide dominance holds: {}; spread requirement holds: {}",
        report.guide_dominates, report.spread_holds
    );
    println!(
        "  gap-augmented bound ok: {:?}; smallest slack {:.6}",
        report.gap_bound_ok, report.min_margin_gap
    );
    println!(
        "  new policy dominates old pointwise: {:?}",
        report.dominates_old_ok
    );
}

fn round2(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}
