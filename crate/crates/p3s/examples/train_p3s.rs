//! Train a small population with soft best-policy guidance and watch the
//! chief work: best-learner selection, policy spread/change estimates and
//! the adaptive penalty weight.
//!
//! ```bash
//! cargo run --release --example train_p3s
//! ```

use p3s::harness::{run, RunConfig};

fn main() {
    let config = RunConfig::from_toml(
        r#"
scheme = "p3s"
env = "pointmass-dense"
n_learners = 4
total_env_steps = 24000
r_eval = 4000
eval_episodes = 5

[td3]
hidden = [32, 32]
batch_size = 64
t_initial = 500

[p3s]
sync_period = 250
d_min = 0.05
distance_batch = 256
"#,
        &[],
    )
    .expect("valid config");

    let artifacts = run(&config, 7, None, 2).expect("run succeeds");

    println!("evaluation (dense point mass, 4 learners):");
    println!("{:>8}  {:>9}  per-learner mean returns", "steps", "max");
    for row in &artifacts.eval_rows {
        let per: Vec<String> = row.learner_returns.iter().map(|r| format!("{r:8.2}")).collect();
        println!(
            "{:>8}  {:>9.2}  [{}]",
            row.total_env_steps,
            row.max_return,
            per.join(" ")
        );
    }

    println!("\nchief syncs (every {} per-learner steps):", config.p3s.sync_period);
    println!("{:>8} {:>5} {:>10} {:>10} {:>10}", "steps", "best", "beta", "d_spread", "d_change");
    for sync in artifacts.sync_rows.iter().step_by(4) {
        println!(
            "{:>8} {:>5} {:>10.4} {:>10.5} {:>10.5}",
            sync.total_env_steps,
            sync.record.best,
            sync.record.beta,
            sync.record.d_spread,
            sync.record.d_change
        );
    }
    println!("\nfinal score (mean of last 10 eval maxima): {:.2}", artifacts.final_score);
}
