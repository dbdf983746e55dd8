use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::StreamRng;

/// Fully connected network: tanh on hidden layers, linear output.
///
/// Parameters are stored flat, layer by layer: the `fan_out x fan_in` weight
/// matrix in row-major order followed by the `fan_out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl TryFrom<RawNet> for DenseNet {
    type Error = Error;

    fn try_from(raw: RawNet) -> Result<Self> {
        DenseNet::new(raw.sizes, raw.params)
    }
}

impl From<DenseNet> for RawNet {
    fn from(net: DenseNet) -> Self {
        RawNet {
            sizes: net.sizes,
            params: net.params,
        }
    }
}

/// Reusable activation buffers for forward and backward passes.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl DenseNet {
    /// `sum (fan_in + 1) * fan_out` over layers.
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 {
            return Err(Error::config("a network needs an input and an output layer"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn new(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        Self::check_sizes(&sizes)?;
        check_dim("parameter vector", Self::param_count(&sizes), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameter"));
        }
        Ok(DenseNet { sizes, params })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        Ok(DenseNet {
            sizes: sizes.to_vec(),
            params: vec![0.0; Self::param_count(sizes)],
        })
    }

    /// Weights i.i.d. uniform in `+-scale / sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = scale / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = if limit > 0.0 { rng.random_range(-limit..limit) } else { 0.0 };
            }
            offset += (fan_in + 1) * fan_out;
        }
        Ok(net)
    }

    pub fn seeded(sizes: &[usize], seed: u64, scale: f64) -> Result<Self> {
        let mut rng: StreamRng = rand::SeedableRng::seed_from_u64(seed);
        Self::init(sizes, scale, &mut rng)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn squared_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum()
    }

    fn ensure_scratch(&self, scratch: &mut Scratch) {
        if scratch.acts.len() != self.sizes.len() || scratch.acts.iter().zip(&self.sizes).any(|(a, s)| a.len() != *s)
        {
            scratch.acts = self.sizes.iter().map(|&s| vec![0.0; s]).collect();
        }
    }

    /// Forward pass leaving every layer's activations in `scratch`.
    fn run(&self, x: &[f64], scratch: &mut Scratch) {
        self.ensure_scratch(scratch);
        scratch.acts[0].copy_from_slice(x);
        let layers = self.sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, rest) = self.params[offset..].split_at(fan_in * fan_out);
            let b = &rest[..fan_out];
            let (prev, next) = scratch.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            for o in 0..fan_out {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                let z = b[o] + row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>();
                out[o] = if l + 1 < layers { z.tanh() } else { z };
            }
            offset += (fan_in + 1) * fan_out;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim(), x.len())?;
        let mut scratch = Scratch::default();
        self.run(x, &mut scratch);
        Ok(scratch.acts.pop().expect("output layer"))
    }

    /// First output for an input of the right dimension, without allocation
    /// once `scratch` is warm.
    pub fn eval(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim());
        self.run(x, scratch);
        scratch.acts.last().expect("output layer")[0]
    }

    /// Adds `weight * d/dparams (net(x) - target)^2` to `grad` and returns the
    /// residual `net(x) - target`. Scalar-output nets only.
    pub(crate) fn accumulate_sq_grad(
        &self,
        x: &[f64],
        target: f64,
        weight: f64,
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> f64 {
        self.run(x, scratch);
        let layers = self.sizes.len() - 1;
        let residual = scratch.acts[layers][0] - target;
        let Scratch {
            acts,
            delta,
            delta_prev,
        } = scratch;
        delta.clear();
        delta.push(2.0 * residual * weight);
        let mut end = self.params.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = end - (fan_in + 1) * fan_out;
            let w = &self.params[start..start + fan_in * fan_out];
            let (gw, gb) = grad[start..end].split_at_mut(fan_in * fan_out);
            let input = &acts[l];
            for o in 0..fan_out {
                let d = delta[o];
                gb[o] += d;
                for (g, a) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                delta_prev.clear();
                delta_prev.resize(fan_in, 0.0);
                for o in 0..fan_out {
                    let d = delta[o];
                    for (dp, wv) in delta_prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *dp += wv * d;
                    }
                }
                for (dp, a) in delta_prev.iter_mut().zip(input) {
                    *dp *= 1.0 - a * a;
                }
                core::mem::swap(delta, delta_prev);
            }
            end = start;
        }
        residual
    }

    /// `(net(x) - target)^2 + l2 * |params|^2` and its exact gradient.
    pub fn grad_sq_loss(&self, x: &[f64], target: f64, l2: f64) -> Result<(f64, Vec<f64>)> {
        check_dim("network input", self.input_dim(), x.len())?;
        check_dim("network output", 1, self.output_dim())?;
        if !target.is_finite() {
            return Err(Error::NonFinite("regression target"));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut scratch = Scratch::default();
        let r = self.accumulate_sq_grad(x, target, 1.0, &mut grad, &mut scratch);
        let mut loss = r * r;
        if l2 != 0.0 {
            loss += l2 * self.squared_norm();
            for (g, p) in grad.iter_mut().zip(&self.params) {
                *g += 2.0 * l2 * p;
            }
        }
        Ok((loss, grad))
    }
}
