//! Adam optimizer with bias correction.

use super::{GradBundle, Mlp};
use crate::error::{Error, Result};

/// Optimizer state shaped like the network it updates: first/second moment
/// accumulators plus the step counter used for bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: GradBundle,
    v: GradBundle,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(net: &Mlp) -> Adam {
        Adam {
            m: GradBundle::zeros_like(net),
            v: GradBundle::zeros_like(net),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update. Rejects non-finite gradients before touching any
    /// parameter, so a failed step leaves the network untouched. A zero
    /// learning rate advances the moments but moves nothing, which keeps
    /// ablation runs comparable step for step.
    pub fn step(&mut self, params: &mut Mlp, grads: &GradBundle, lr: f64) -> Result<()> {
        assert!(lr >= 0.0, "learning rate must be nonnegative");
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (weights, biases) = params.weights_raw_mut();

        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        };

        for l in 0..weights.len() {
            update(
                &mut weights[l],
                &grads.weights[l],
                &mut self.m.weights[l],
                &mut self.v.weights[l],
            );
            update(
                &mut biases[l],
                &grads.biases[l],
                &mut self.m.biases[l],
                &mut self.v.biases[l],
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputActivation;

    fn unit_net() -> Mlp {
        Mlp::init(&[1, 1], OutputActivation::Linear, 0).unwrap()
    }

    fn grads_of(value: f64, net: &Mlp) -> GradBundle {
        let mut g = GradBundle::zeros_like(net);
        for w in &mut g.weights {
            w.fill(value);
        }
        for b in &mut g.biases {
            b.fill(value);
        }
        g
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        let mut net = unit_net();
        let before = net.get_flat(0);
        let mut adam = Adam::new(&net);
        let g = grads_of(1.0, &net);
        adam.step(&mut net, &g, 1e-3).unwrap();
        let delta = net.get_flat(0) - before;
        assert!((delta + 1e-3).abs() < 1e-6, "delta {delta}");
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut net = Mlp::init(&[3, 4, 2], OutputActivation::Tanh, 5).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net);
        let g = grads_of(0.0, &net);
        for _ in 0..10 {
            adam.step(&mut net, &g, 1e-3).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut net = Mlp::init(&[2, 4, 1], OutputActivation::Linear, 13).unwrap();
            let mut adam = Adam::new(&net);
            for k in 1..=25 {
                let g = grads_of(0.1 * k as f64, &net);
                adam.step(&mut net, &g, 1e-3).unwrap();
            }
            net
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn first_step_is_invariant_to_gradient_scale() {
        let deltas: Vec<f64> = [1.0, 10.0, 1e4]
            .iter()
            .map(|&c| {
                let mut net = unit_net();
                let before = net.get_flat(0);
                let mut adam = Adam::new(&net);
                let g = grads_of(c, &net);
                adam.step(&mut net, &g, 1e-3).unwrap();
                net.get_flat(0) - before
            })
            .collect();
        for d in &deltas[1..] {
            assert!((d - deltas[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_touching_params() {
        let mut net = unit_net();
        let before = net.clone();
        let mut adam = Adam::new(&net);
        let mut g = grads_of(1.0, &net);
        g.weights[0][0] = f64::NAN;
        assert!(adam.step(&mut net, &g, 1e-3).is_err());
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 0);
    }
}
