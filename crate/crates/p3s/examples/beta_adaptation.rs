//! The penalty-weight controller in isolation: feed a synthetic stream of
//! (spread, change) distance estimates through the doubling/halving rule
//! and watch beta steer the spread toward the search radius.
//!
//! ```bash
//! cargo run --release --example beta_adaptation
//! ```

use p3s::chief::adapt_beta;

fn main() {
    let (rho, d_min) = (2.0, 0.05);
    println!("rule: radius = max(rho * change, d_min); spread above 1.5x doubles beta, below /1.5 halves it");
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}  action", "step", "spread", "change", "radius", "beta");

    let mut beta = 1.0;
    // a population that starts collapsed, spreads too far, then settles
    let stream: Vec<(f64, f64)> = (0..24)
        .map(|k| match k {
            0..=5 => (0.005 * (k + 1) as f64, 0.002),     // collapsed: spread tiny
            6..=11 => (0.40 - 0.02 * k as f64, 0.01),     // overshoot: spread large
            _ => (0.065, 0.012),                          // near the radius: dead zone
        })
        .collect();

    for (step, (spread, change)) in stream.iter().enumerate() {
        let radius = (rho * change).max(d_min);
        let next = adapt_beta(beta, *spread, *change, rho, d_min);
        let action = if next > beta {
            "double (spread too wide)"
        } else if next < beta {
            "halve (spread collapsed)"
        } else {
            "hold (inside dead zone)"
        };
        println!("{step:>4} {spread:>10.4} {change:>10.4} {radius:>10.4} {next:>10.4}  {action}");
        beta = next;
    }

    // beta is a pure function of the stream: replaying reproduces it
    let replay = |stream: &[(f64, f64)]| -> f64 {
        let mut b = 1.0;
        for (s, c) in stream {
            b = adapt_beta(b, *s, *c, rho, d_min);
        }
        b
    };
    assert_eq!(replay(&stream), beta);
    println!("\nreplaying the logged stream reproduces beta = {beta} exactly");
}
