use p3s::harness::{run, RunConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let text = r#"
scheme = "p3s"
env = "delayed:pointmass-sparse:20"
n_learners = 4
total_env_steps = 20000
r_eval = 4000

[td3]
hidden = [64, 64]
t_initial = 1000

[p3s]
d_min = 0.05
"#;
    let cfg = RunConfig::from_toml(text, &args).unwrap();
    let t0 = std::time::Instant::now();
    let art = run(&cfg, 1, None, 2).unwrap();
    println!("elapsed: {:?}", t0.elapsed());
    println!("final score: {}", art.final_score);
    for row in &art.eval_rows {
        println!("{:>7} {:?} max={:.3}", row.total_env_steps,
            row.learner_returns.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            row.max_return);
    }
    for s in &art.sync_rows {
        if s.total_env_steps % 4000 == 0 {
            println!("sync@{:>7} best={} beta={:.4} spread={:.5} change={:.5}", s.total_env_steps, s.record.best, s.record.beta, s.record.d_spread, s.record.d_change);
        }
    }
}
