use p3s::harness::{run, RunConfig};

fn base(scheme: &str, n: usize, steps: u64, t_init_total: u64) -> String {
    format!(r#"
scheme = "{scheme}"
env = "delayed:pointmass-sparse:20"
n_learners = {n}
total_env_steps = {steps}
r_eval = 4000

[td3]
hidden = [64, 64]
t_initial = {}

[p3s]
d_min = 0.05

[resetting]
reset_period = 2000
"#, t_init_total / n as u64)
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: u64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(60000);
    let seeds: Vec<u64> = args.get(1).map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![1, 2, 3]);
    let t_init_total: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(4000);
    let extra: Vec<String> = args.into_iter().skip(3).collect();
    for scheme in ["p3s", "single", "resetting"] {
        let n = if scheme == "single" { 1 } else { 4 };
        let cfg = RunConfig::from_toml(&base(scheme, n, steps, t_init_total), &extra).unwrap();
        let mut finals = Vec::new();
        for &seed in &seeds {
            let t0 = std::time::Instant::now();
            let art = run(&cfg, seed, None, 2).unwrap();
            finals.push(art.final_score);
            eprintln!("  {scheme} seed {seed}: final={:+.4}  ({:?})", art.final_score, t0.elapsed());
        }
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("{scheme:>10}: mean={:+.4} finals={:?}", mean, finals.iter().map(|f| (f * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }
}
