//! Run every parallel scheme on the same budget and seed, then print the
//! comparison table. All schemes share the learner, buffer and evaluation
//! code, so the differences are purely orchestration.
//!
//! ```bash
//! cargo run --release --example compare_schemes
//! ```

use p3s::harness::{comparison_table, run, RunConfig, RunEntry};

fn config_for(scheme: &str) -> RunConfig {
    let n = if scheme == "single" { 1 } else { 4 };
    RunConfig::from_toml(
        &format!(
            r#"
scheme = "{scheme}"
env = "pointmass-dense"
n_learners = {n}
total_env_steps = 16000
r_eval = 4000
eval_episodes = 5

[td3]
hidden = [32, 32]
batch_size = 64
t_initial = {}

[p3s]
d_min = 0.05
distance_batch = 256

[resetting]
reset_period = 1000

[center]
center_period = 250
center_batch = 256
"#,
            // align warmup in total steps so update counts match at equal
            // x-axis positions
            2000 / n
        ),
        &[],
    )
    .expect("valid config")
}

fn main() {
    let mut entries = Vec::new();
    for scheme in ["single", "drl", "eso", "resetting", "center", "p3s"] {
        let config = config_for(scheme);
        let t0 = std::time::Instant::now();
        let mut interactions = 0;
        let mut updates = 0;
        for seed in [1, 2] {
            let artifacts = run(&config, seed, None, 2).expect("run succeeds");
            interactions = artifacts.env_interactions;
            updates = artifacts.update_iterations;
            entries.push(RunEntry {
                scheme: scheme.to_string(),
                env: config.env.clone(),
                master_seed: seed,
                final_score: artifacts.final_score,
            });
        }
        println!(
            "{scheme:>10}: {} env interactions, {} update iterations per run ({:.1?})",
            interactions,
            updates,
            t0.elapsed() / 2
        );
    }
    let (table, _) = comparison_table(&entries);
    println!("\n{table}");
}
