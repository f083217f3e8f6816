//! The delayed-reward wrapper: rewards accumulate silently and are emitted
//! every `f`-th step (plus a terminal flush), turning any task into a
//! sparse-reward task without changing episode returns.
//!
//! ```bash
//! cargo run --release --example delayed_rewards
//! ```

use p3s::env::make_env;

fn main() {
    // side-by-side trace on the dense point mass
    let mut raw = make_env("pointmass-dense").unwrap();
    let mut delayed = make_env("delayed:pointmass-dense:5").unwrap();
    raw.reset(42);
    delayed.reset(42);

    println!("{:>4} {:>12} {:>12}", "step", "raw reward", "emitted");
    let mut raw_sum = 0.0;
    let mut emitted_sum = 0.0;
    for step in 1..=15 {
        let action = [0.4, -0.2];
        let r = raw.step(&action).unwrap();
        let d = delayed.step(&action).unwrap();
        raw_sum += r.reward;
        emitted_sum += d.reward;
        println!("{step:>4} {:>12.5} {:>12.5}", r.reward, d.reward);
    }
    println!("partial sums: raw {raw_sum:.6}, emitted {emitted_sum:.6} (emission lags, totals match at episode end)");

    // conservation across whole episodes, several periods
    for f in [1u32, 2, 7, 20] {
        let mut raw = make_env("pointmass-sparse").unwrap();
        let mut delayed = make_env(&format!("delayed:pointmass-sparse:{f}")).unwrap();
        raw.reset(7);
        delayed.reset(7);
        let mut raw_ret = 0.0;
        let mut del_ret = 0.0;
        for k in 0.. {
            let a = [((k as f64) * 0.13).sin(), ((k as f64) * 0.31).cos()];
            let r = raw.step(&a).unwrap();
            let d = delayed.step(&a).unwrap();
            raw_ret += r.reward;
            del_ret += d.reward;
            assert_eq!(r.done, d.done);
            if r.episode_over() {
                break;
            }
        }
        println!(
            "f = {f:>2}: episode return raw {raw_ret:.10}, delayed {del_ret:.10}, |difference| = {:.1e}",
            (raw_ret - del_ret).abs()
        );
    }
}
