//! Dense numeric core: MLP forward/backward, Adam, soft target updates.
//!
//! Everything is `f64` and bitwise-deterministic given a seed. Networks are
//! plain ReLU MLPs with a linear or tanh head; gradients are exact
//! reverse-mode, computed against a cached forward pass. There is no
//! general autodiff here — just the dense layers the training losses need.
//!
//! Batched inputs/outputs are flat row-major buffers: a batch of `B`
//! vectors of width `d` is `B * d` scalars.

mod adam;
mod snapshot;

pub use adam::Adam;
pub use snapshot::{load_network, save_network};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Activation applied by the final layer. Hidden layers are always ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Tanh,
}

/// A dense feed-forward network: per-layer weight matrices (row-major,
/// `out x in`) and bias vectors, plus the output activation.
///
/// Consecutive layer shapes chain; all entries stay finite (updates abort
/// on non-finite gradients before parameters can be poisoned).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    output_activation: OutputActivation,
}

/// Per-parameter gradients, shaped exactly like the network they came from.
#[derive(Debug, Clone, Default)]
pub struct GradBundle {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl GradBundle {
    pub fn zeros_like(net: &Mlp) -> Self {
        GradBundle {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Zero the bundle, reshaping it to `net` first when shapes differ.
    pub fn reset_like(&mut self, net: &Mlp) {
        let matches = self.weights.len() == net.weights.len()
            && self
                .weights
                .iter()
                .zip(&net.weights)
                .all(|(a, b)| a.len() == b.len())
            && self
                .biases
                .iter()
                .zip(&net.biases)
                .all(|(a, b)| a.len() == b.len());
        if matches {
            self.zero();
        } else {
            *self = Self::zeros_like(net);
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Activation record from a batched forward pass, with scratch space reused
/// by the backward pass. `activations[0]` is the input; `activations[l+1]`
/// holds layer `l`'s post-activation output.
#[derive(Debug, Clone, Default)]
pub struct BatchCache {
    batch: usize,
    activations: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl BatchCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Output of the cached forward pass, `batch x out_dim` row-major.
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("forward not yet run")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    fn ensure(&mut self, sizes: &[usize], batch: usize) {
        self.batch = batch;
        self.activations.resize(sizes.len(), Vec::new());
        for (buf, &dim) in self.activations.iter_mut().zip(sizes) {
            buf.clear();
            buf.resize(batch * dim, 0.0);
        }
        let widest = sizes.iter().copied().max().unwrap_or(0);
        self.delta.clear();
        self.delta.resize(batch * widest, 0.0);
        self.delta_prev.clear();
        self.delta_prev.resize(batch * widest, 0.0);
    }
}

impl Mlp {
    /// Build a network with `sizes[0]` inputs and `sizes.last()` outputs.
    ///
    /// Weights are uniform in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`, drawn
    /// layer by layer in row-major order from a ChaCha stream seeded with
    /// `seed`; biases start at zero.
    pub fn init(sizes: &[usize], output_activation: OutputActivation, seed: u64) -> Result<Mlp> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!(
                "network needs at least 2 layer sizes, got {}",
                sizes.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| (2.0 * rng.random::<f64>() - 1.0) * bound)
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            output_activation,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Single-vector forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: input.len(),
                context: "mlp forward input",
            });
        }
        let mut cache = BatchCache::new();
        self.forward_batch(input, 1, &mut cache);
        Ok(cache.output().to_vec())
    }

    /// Batched forward pass; activations land in `cache` for a later
    /// backward pass. Panics on shape mismatch (validated at construction
    /// by every caller in this crate).
    pub fn forward_batch(&self, input: &[f64], batch: usize, cache: &mut BatchCache) {
        assert_eq!(
            input.len(),
            batch * self.input_dim(),
            "batched input length mismatch"
        );
        cache.ensure(&self.sizes, batch);
        cache.activations[0].copy_from_slice(input);
        let n_layers = self.weights.len();
        for l in 0..n_layers {
            let (in_dim, out_dim) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.weights[l];
            let bias = &self.biases[l];
            let (head, tail) = cache.activations.split_at_mut(l + 1);
            let x = &head[l];
            let y = &mut tail[0];
            for b in 0..batch {
                let xr = &x[b * in_dim..(b + 1) * in_dim];
                let yr = &mut y[b * out_dim..(b + 1) * out_dim];
                for o in 0..out_dim {
                    let wr = &w[o * in_dim..(o + 1) * in_dim];
                    yr[o] = bias[o] + dot(wr, xr);
                }
                if l + 1 < n_layers {
                    for v in yr.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                } else if self.output_activation == OutputActivation::Tanh {
                    for v in yr.iter_mut() {
                        *v = v.tanh();
                    }
                }
            }
        }
    }

    /// Reverse-mode pass for the scalar `sum_b <out_grad_b, output_b>`
    /// against the cached forward activations.
    ///
    /// `grads`, when given, is overwritten with the exact parameter
    /// gradient; `input_grad`, when given, receives the gradient with
    /// respect to the batched input (resized as needed).
    pub fn backprop(
        &self,
        cache: &mut BatchCache,
        out_grad: &[f64],
        mut grads: Option<&mut GradBundle>,
        mut input_grad: Option<&mut Vec<f64>>,
    ) {
        let batch = cache.batch;
        let n_layers = self.weights.len();
        assert_eq!(
            out_grad.len(),
            batch * self.output_dim(),
            "output grad length mismatch"
        );
        if let Some(g) = grads.as_deref_mut() {
            g.zero();
        }

        // delta holds dL/d(pre-activation) of the current layer
        let out_dim = self.output_dim();
        cache.delta[..batch * out_dim].copy_from_slice(out_grad);
        if self.output_activation == OutputActivation::Tanh {
            let y = cache.activations.last().unwrap();
            for (d, &yv) in cache.delta[..batch * out_dim].iter_mut().zip(y.iter()) {
                *d *= 1.0 - yv * yv;
            }
        }

        for l in (0..n_layers).rev() {
            let (in_dim, out_dim) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.weights[l];
            let x = &cache.activations[l];
            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g.weights[l];
                let gb = &mut g.biases[l];
                for b in 0..batch {
                    let dr = &cache.delta[b * out_dim..(b + 1) * out_dim];
                    let xr = &x[b * in_dim..(b + 1) * in_dim];
                    for o in 0..out_dim {
                        let d = dr[o];
                        gb[o] += d;
                        let gwr = &mut gw[o * in_dim..(o + 1) * in_dim];
                        for i in 0..in_dim {
                            gwr[i] += d * xr[i];
                        }
                    }
                }
            }
            let need_prev = l > 0 || input_grad.is_some();
            if !need_prev {
                break;
            }
            cache.delta_prev[..batch * in_dim].fill(0.0);
            for b in 0..batch {
                let dr = &cache.delta[b * out_dim..(b + 1) * out_dim];
                let pr = &mut cache.delta_prev[b * in_dim..(b + 1) * in_dim];
                for o in 0..out_dim {
                    let d = dr[o];
                    let wr = &w[o * in_dim..(o + 1) * in_dim];
                    for i in 0..in_dim {
                        pr[i] += d * wr[i];
                    }
                }
            }
            if l > 0 {
                // gate through the previous layer's ReLU
                for (p, &a) in cache.delta_prev[..batch * in_dim]
                    .iter_mut()
                    .zip(x.iter())
                {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                cache.delta[..batch * in_dim]
                    .copy_from_slice(&cache.delta_prev[..batch * in_dim]);
            } else if let Some(ig) = input_grad.as_deref_mut() {
                ig.clear();
                ig.extend_from_slice(&cache.delta_prev[..batch * in_dim]);
            }
        }
    }

    /// Polyak update: `self = (1 - tau) * self + tau * source`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        assert_eq!(self.sizes, source.sizes, "soft update shape mismatch");
        assert!(tau > 0.0 && tau <= 1.0, "tau must be in (0, 1]");
        let keep = 1.0 - tau;
        for (sw, ow) in self.weights.iter_mut().zip(&source.weights) {
            for (s, &o) in sw.iter_mut().zip(ow) {
                *s = keep * *s + tau * o;
            }
        }
        for (sb, ob) in self.biases.iter_mut().zip(&source.biases) {
            for (s, &o) in sb.iter_mut().zip(ob) {
                *s = keep * *s + tau * o;
            }
        }
    }

    /// Max |a - b| over all parameters of two same-shape networks.
    pub fn max_abs_diff(&self, other: &Mlp) -> f64 {
        assert_eq!(self.sizes, other.sizes, "shape mismatch");
        let mut m: f64 = 0.0;
        for (a, b) in self.weights.iter().zip(&other.weights) {
            for (x, y) in a.iter().zip(b) {
                m = m.max((x - y).abs());
            }
        }
        for (a, b) in self.biases.iter().zip(&other.biases) {
            for (x, y) in a.iter().zip(b) {
                m = m.max((x - y).abs());
            }
        }
        m
    }

    /// Number of scalar parameters when the network is viewed flat
    /// (weights of layer 0 row-major, then its biases, then layer 1, ...).
    pub fn flat_len(&self) -> usize {
        self.param_count()
    }

    pub fn get_flat(&self, idx: usize) -> f64 {
        let (l, in_w, pos) = self.locate(idx);
        if in_w {
            self.weights[l][pos]
        } else {
            self.biases[l][pos]
        }
    }

    pub fn set_flat(&mut self, idx: usize, value: f64) {
        let (l, in_w, pos) = self.locate(idx);
        if in_w {
            self.weights[l][pos] = value;
        } else {
            self.biases[l][pos] = value;
        }
    }

    /// Gradient entry in the same flat order as `get_flat`.
    pub fn grad_flat(grads: &GradBundle, idx: usize, shape: &Mlp) -> f64 {
        let (l, in_w, pos) = shape.locate(idx);
        if in_w {
            grads.weights[l][pos]
        } else {
            grads.biases[l][pos]
        }
    }

    fn locate(&self, mut idx: usize) -> (usize, bool, usize) {
        for l in 0..self.weights.len() {
            if idx < self.weights[l].len() {
                return (l, true, idx);
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return (l, false, idx);
            }
            idx -= self.biases[l].len();
        }
        panic!("flat parameter index out of range");
    }

    pub(crate) fn weights_raw(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.weights, &self.biases)
    }

    pub(crate) fn weights_raw_mut(&mut self) -> (&mut [Vec<f64>], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    pub(crate) fn from_raw(
        sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        output_activation: OutputActivation,
    ) -> Mlp {
        Mlp {
            sizes,
            weights,
            biases,
            output_activation,
        }
    }
}

/// Lane-split dot product; the fixed-width inner loops vectorize.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let ac = &a[c * LANES..(c + 1) * LANES];
        let bc = &b[c * LANES..(c + 1) * LANES];
        for k in 0..LANES {
            acc[k] += ac[k] * bc[k];
        }
    }
    let mut tail = 0.0;
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    acc.iter().sum::<f64>() + tail
}
