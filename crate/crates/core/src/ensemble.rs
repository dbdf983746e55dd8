//! Randomized-prior value ensemble with log-sum-exp optimism.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::approximator::{Adam, DenseNet, Scratch};
use crate::error::{check_dim, Error, Result};
use crate::mdp::Bounds;
use crate::rng::{self, StreamRng};

/// Hyperparameters shared by every member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Number of members `K`.
    pub members: usize,
    pub hidden: Vec<usize>,
    /// Optimism temperature `kappa`.
    pub optimism: f64,
    pub prior_scale: f64,
    /// Standard deviation of the noise added to every regression target.
    pub target_noise: f64,
    /// Weight-decay strength is `target_noise^2 / regularization`.
    pub regularization: f64,
    pub learning_rate: f64,
    /// Divide the log-sum-exp by `kappa`, putting the aggregate on the scale of
    /// the member values.
    pub normalized: bool,
    /// State coordinates fed to the networks, in order. Empty means all.
    pub inputs: Vec<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            members: 6,
            hidden: vec![16, 16],
            optimism: 0.1,
            prior_scale: 1.0,
            target_noise: 0.01,
            regularization: 1.0,
            learning_rate: 1e-3,
            normalized: false,
            inputs: Vec::new(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(Error::config("ensemble needs at least one member"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("hidden layer sizes must be positive"));
        }
        if !(self.optimism > 0.0 && self.optimism.is_finite()) {
            return Err(Error::config("optimism temperature must be positive"));
        }
        if !(self.prior_scale >= 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::config("prior scale must be non-negative"));
        }
        if !(self.target_noise >= 0.0 && self.target_noise.is_finite()) {
            return Err(Error::config("target noise must be non-negative"));
        }
        if !(self.regularization > 0.0) {
            return Err(Error::config("regularization must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }

    /// The network input coordinates for a state of dimension `state_dim`.
    pub fn input_coords(&self, state_dim: usize) -> Result<Vec<usize>> {
        if self.inputs.is_empty() {
            return Ok((0..state_dim).collect());
        }
        for (i, &c) in self.inputs.iter().enumerate() {
            if c >= state_dim {
                return Err(Error::OutOfRange { index: c, len: state_dim });
            }
            if self.inputs[..i].contains(&c) {
                return Err(Error::config("ensemble inputs repeat a coordinate"));
            }
        }
        Ok(self.inputs.clone())
    }

    /// Coefficient on `|theta|^2` in the member loss.
    pub fn weight_decay(&self) -> f64 {
        self.target_noise * self.target_noise / self.regularization
    }

    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(1);
        sizes
    }
}

#[derive(Clone, Debug)]
pub struct Member {
    prior: DenseNet,
    trainable: DenseNet,
    optimizer: Adam,
    noise: StreamRng,
}

impl Member {
    pub fn prior(&self) -> &DenseNet {
        &self.prior
    }

    pub fn trainable(&self) -> &DenseNet {
        &self.trainable
    }

    pub fn trainable_mut(&mut self) -> &mut DenseNet {
        &mut self.trainable
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }
}

#[derive(Clone, Debug)]
pub struct ValueEnsemble {
    config: EnsembleConfig,
    ranges: Vec<Bounds>,
    coords: Vec<usize>,
    members: Vec<Member>,
}

/// Serializable snapshot: hyperparameters, input ranges and all `2K` nets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleCheckpoint {
    pub config: EnsembleConfig,
    pub ranges: Vec<Bounds>,
    pub priors: Vec<DenseNet>,
    pub trainables: Vec<DenseNet>,
}

fn normalize(ranges: &[Bounds], coords: &[usize], s: &[f64], x: &mut [f64]) {
    for (xi, &c) in x.iter_mut().zip(coords) {
        *xi = ranges[c].normalize(s[c]);
    }
}

/// `m + ln sum exp(x_i - m)` with `m = max x_i`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl ValueEnsemble {
    /// Builds `K` members for states whose coordinates lie in `ranges`. Priors
    /// are drawn at `prior_scale`, trainable nets at a tenth of it.
    pub fn new(config: EnsembleConfig, ranges: &[Bounds], seed: u64) -> Result<Self> {
        config.validate()?;
        if ranges.is_empty() {
            return Err(Error::Empty("state ranges"));
        }
        let coords = config.input_coords(ranges.len())?;
        let sizes = config.layer_sizes(coords.len());
        let mut members = Vec::with_capacity(config.members);
        for k in 0..config.members {
            let mut init = rng::member_stream(seed, rng::ENSEMBLE_INIT, k);
            let prior = DenseNet::init(&sizes, config.prior_scale, &mut init)?;
            let trainable = DenseNet::init(&sizes, 0.1 * config.prior_scale, &mut init)?;
            let optimizer = Adam::with_learning_rate(trainable.params().len(), config.learning_rate);
            members.push(Member {
                prior,
                trainable,
                optimizer,
                noise: rng::member_stream(seed, rng::MEMBER_NOISE, k),
            });
        }
        Ok(ValueEnsemble {
            config,
            ranges: ranges.to_vec(),
            coords,
            members,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, k: usize) -> Result<&Member> {
        let len = self.members.len();
        self.members.get(k).ok_or(Error::OutOfRange { index: k, len })
    }

    pub fn member_mut(&mut self, k: usize) -> Result<&mut Member> {
        let len = self.members.len();
        self.members.get_mut(k).ok_or(Error::OutOfRange { index: k, len })
    }

    pub fn state_dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn input_dim(&self) -> usize {
        self.coords.len()
    }

    /// Network input for a state: each selected coordinate mapped from its
    /// declared range onto `[-1, 1]`.
    pub fn normalize_into(&self, s: &[f64], x: &mut [f64]) {
        normalize(&self.ranges, &self.coords, s, x);
    }

    /// Evaluation buffers for repeated queries.
    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator {
            ensemble: self,
            input: vec![0.0; self.input_dim()],
            values: vec![0.0; self.len()],
            scratch: Scratch::default(),
        }
    }

    pub fn member_predict(&self, k: usize, s: &[f64]) -> Result<f64> {
        check_dim("state", self.state_dim(), s.len())?;
        self.member(k)?;
        Ok(self.evaluator().member(k, s))
    }

    pub fn ensemble_value(&self, s: &[f64]) -> Result<f64> {
        check_dim("state", self.state_dim(), s.len())?;
        Ok(self.evaluator().value(s))
    }

    /// Aggregates member values the way `ensemble_value` does.
    pub fn aggregate(&self, values: &mut [f64]) -> f64 {
        let kappa = self.config.optimism;
        for v in values.iter_mut() {
            *v *= kappa;
        }
        let lse = log_sum_exp(values);
        if self.config.normalized {
            lse / kappa
        } else {
            lse
        }
    }

    /// One optimizer step on member `k`'s trainable net against noisy targets.
    /// Returns the mean loss (squared error plus weight decay) before the step.
    pub fn train_member(&mut self, k: usize, batch: &[(&[f64], f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        for (s, y) in batch {
            check_dim("state", self.state_dim(), s.len())?;
            if !y.is_finite() {
                return Err(Error::NonFinite("regression target"));
            }
        }
        let decay = self.config.weight_decay();
        let sigma = self.config.target_noise;
        let ranges = &self.ranges;
        let coords = &self.coords;
        let len = self.members.len();
        let member = self.members.get_mut(k).ok_or(Error::OutOfRange { index: k, len })?;
        let noise = Normal::new(0.0, sigma).map_err(|_| Error::config("target noise"))?;

        let n = batch.len() as f64;
        let mut grad = vec![0.0; member.trainable.params().len()];
        let mut x = vec![0.0; coords.len()];
        let mut scratch = Scratch::default();
        let mut sq = 0.0;
        for (s, y) in batch {
            let zeta = if sigma > 0.0 { noise.sample(&mut member.noise) } else { 0.0 };
            normalize(ranges, coords, s, &mut x);
            let residual_target = y + zeta - member.prior.eval(&x, &mut scratch);
            let r = member
                .trainable
                .accumulate_sq_grad(&x, residual_target, 1.0 / n, &mut grad, &mut scratch);
            sq += r * r;
        }
        let mut loss = sq / n;
        if decay > 0.0 {
            loss += decay * member.trainable.squared_norm();
            for (g, p) in grad.iter_mut().zip(member.trainable.params()) {
                *g += 2.0 * decay * p;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        member.optimizer.step(member.trainable.params_mut(), &grad)?;
        Ok(loss)
    }

    pub fn checkpoint(&self) -> EnsembleCheckpoint {
        EnsembleCheckpoint {
            config: self.config.clone(),
            ranges: self.ranges.clone(),
            priors: self.members.iter().map(|m| m.prior.clone()).collect(),
            trainables: self.members.iter().map(|m| m.trainable.clone()).collect(),
        }
    }

    /// Rebuilds an ensemble from a snapshot. Optimizer moments start fresh and
    /// noise streams are re-derived from `seed`.
    pub fn from_checkpoint(cp: EnsembleCheckpoint, seed: u64) -> Result<Self> {
        cp.config.validate()?;
        check_dim("prior nets", cp.config.members, cp.priors.len())?;
        check_dim("trainable nets", cp.config.members, cp.trainables.len())?;
        let coords = cp.config.input_coords(cp.ranges.len())?;
        let sizes = cp.config.layer_sizes(coords.len());
        let mut members = Vec::with_capacity(cp.config.members);
        for (k, (prior, trainable)) in cp.priors.into_iter().zip(cp.trainables).enumerate() {
            if prior.sizes() != sizes.as_slice() || trainable.sizes() != sizes.as_slice() {
                return Err(Error::config("checkpoint layer sizes disagree with its configuration"));
            }
            let optimizer = Adam::with_learning_rate(trainable.params().len(), cp.config.learning_rate);
            members.push(Member {
                prior,
                trainable,
                optimizer,
                noise: rng::member_stream(seed, rng::MEMBER_NOISE, k),
            });
        }
        Ok(ValueEnsemble {
            config: cp.config,
            ranges: cp.ranges,
            coords,
            members,
        })
    }
}

/// Reusable buffers for evaluating an ensemble without allocating.
pub struct Evaluator<'a> {
    ensemble: &'a ValueEnsemble,
    input: Vec<f64>,
    values: Vec<f64>,
    scratch: Scratch,
}

impl Evaluator<'_> {
    fn member_normalized(&mut self, k: usize) -> f64 {
        let m = &self.ensemble.members[k];
        m.prior.eval(&self.input, &mut self.scratch) + m.trainable.eval(&self.input, &mut self.scratch)
    }

    /// `prior_k(x(s)) + trainable_k(x(s))`. Panics if `k` is out of range.
    pub fn member(&mut self, k: usize, s: &[f64]) -> f64 {
        self.ensemble.normalize_into(s, &mut self.input);
        self.member_normalized(k)
    }

    /// All member values at `s`, in member order.
    pub fn members(&mut self, s: &[f64]) -> &[f64] {
        self.ensemble.normalize_into(s, &mut self.input);
        for k in 0..self.ensemble.len() {
            self.values[k] = self.member_normalized(k);
        }
        &self.values
    }

    pub fn value(&mut self, s: &[f64]) -> f64 {
        self.members(s);
        let mut values = core::mem::take(&mut self.values);
        let v = self.ensemble.aggregate(&mut values);
        self.values = values;
        v
    }

    pub fn mean(&mut self, s: &[f64]) -> f64 {
        let vs = self.members(s);
        vs.iter().sum::<f64>() / vs.len() as f64
    }

    /// Population standard deviation of member values at `s`.
    pub fn stddev(&mut self, s: &[f64]) -> f64 {
        let vs = self.members(s);
        let n = vs.len() as f64;
        let mean = vs.iter().sum::<f64>() / n;
        (vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
    }
}
