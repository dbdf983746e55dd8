//! MPPI trajectory optimization with a terminal value, N-step value targets and
//! a one-step greedy policy.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::mdp::{clamp_into, step_into, Action, EnvModel};
use crate::oracle::DEFAULT_SEARCH_BUDGET;

/// How rollout perturbations are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Perturbation {
    /// i.i.d. `N(0, noise^2)` per step and action dimension.
    Gaussian,
    /// Each step adds one vector chosen uniformly from `set`.
    Discrete { set: Vec<Vec<f64>> },
    /// Every one of the `|set|^H` sequences over `set`, in lexicographic order;
    /// the rollout count is ignored.
    Exhaustive { set: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub rollouts: usize,
    /// Perturbation standard deviation for [`Perturbation::Gaussian`].
    pub noise: f64,
    pub temperature: f64,
    pub discount: f64,
    pub warm_start: bool,
    /// Perturb-and-reweight passes per call.
    pub iterations: usize,
    /// Draw Gaussian perturbations in `(eps, -eps)` pairs. Uniform weights then
    /// leave the nominal exactly where it was.
    pub antithetic: bool,
    /// AR(1) coefficient on Gaussian perturbations across time steps. The
    /// marginal standard deviation stays `noise`; 0 gives white noise.
    pub smoothing: f64,
    pub perturbation: Perturbation,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 64,
            rollouts: 120,
            noise: 0.2,
            temperature: 1.25,
            discount: 0.99,
            warm_start: true,
            iterations: 1,
            antithetic: true,
            smoothing: 0.0,
            perturbation: Perturbation::Gaussian,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, action_dim: usize) -> Result<()> {
        if self.horizon == 0 || self.rollouts == 0 || self.iterations == 0 {
            return Err(Error::config("horizon, rollouts and iterations must be positive"));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::config("planner noise must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature must be positive"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("discount must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::config("smoothing must lie in [0, 1)"));
        }
        match &self.perturbation {
            Perturbation::Gaussian => {}
            Perturbation::Discrete { set } | Perturbation::Exhaustive { set } => {
                if set.is_empty() {
                    return Err(Error::Empty("perturbation set"));
                }
                for v in set {
                    check_dim("perturbation", action_dim, v.len())?;
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite("perturbation"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of rollouts one iteration evaluates.
    pub fn rollouts_per_iteration(&self) -> Result<usize> {
        match &self.perturbation {
            Perturbation::Exhaustive { set } => {
                let count = (set.len() as u128).checked_pow(self.horizon as u32).unwrap_or(u128::MAX);
                if count > DEFAULT_SEARCH_BUDGET as u128 {
                    Err(Error::Budget {
                        count,
                        budget: DEFAULT_SEARCH_BUDGET,
                    })
                } else {
                    Ok(count as usize)
                }
            }
            _ => Ok(self.rollouts),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    /// Optimized action sequence, clamped to the action bounds.
    pub nominal: Vec<Action>,
    pub first_action: Action,
    /// Largest return among all evaluated sequences, including the nominal
    /// each iteration started from.
    pub best_return: f64,
    /// Softmax-weighted mean of the sampled returns in the final iteration.
    pub weighted_return: f64,
    /// Normalized rollout weights of the final iteration.
    pub weights: Vec<f64>,
}

impl PlanResult {
    /// Nominal sequence flattened step-major, as accepted by `mppi_plan`.
    pub fn flat_nominal(&self) -> Vec<f64> {
        self.nominal.iter().flat_map(|a| a.iter().copied()).collect()
    }
}

/// Discounted return of the clamped `actions` (flat, step-major) from `s`,
/// plus `gamma^H * value(s_H)`. `state` and `next` are scratch of state size.
#[allow(clippy::too_many_arguments)]
fn score<M, V>(
    model: &M,
    s: &[f64],
    actions: &[f64],
    gamma: f64,
    value: &mut V,
    state: &mut Vec<f64>,
    next: &mut Vec<f64>,
    clamped: &mut [f64],
) -> Result<f64>
where
    M: EnvModel + ?Sized,
    V: FnMut(&[f64]) -> f64,
{
    let d = clamped.len();
    state.clear();
    state.extend_from_slice(s);
    let mut total = 0.0;
    let mut disc = 1.0;
    for a in actions.chunks_exact(d) {
        clamp_into(model.action_bounds(), a, clamped);
        let r = step_into(model, state, clamped, next)?;
        total += disc * r;
        disc *= gamma;
        core::mem::swap(state, next);
    }
    let v = value(state);
    if !v.is_finite() {
        return Err(Error::NonFiniteValue { state: state.clone() });
    }
    Ok(total + disc * v)
}

fn shifted(prev: &[f64], len: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if prev.len() < d {
        return out;
    }
    let src = &prev[d.min(prev.len())..];
    let last = &prev[prev.len() - d..];
    for (t, chunk) in out.chunks_exact_mut(d).enumerate() {
        let from = t * d;
        if from + d <= src.len() {
            chunk.copy_from_slice(&src[from..from + d]);
        } else {
            chunk.copy_from_slice(last);
        }
    }
    out
}

/// One MPPI solve from `s`.
///
/// The nominal sequence starts from `prev` shifted one step (last action
/// repeated) when warm-starting, else from zeros. Each iteration scores the
/// current nominal and every perturbed sequence `clamp(nominal + eps_i)` by
/// discounted reward plus `gamma^H * value(s_H)`, then moves the nominal by the
/// `exp((G_i - max G) / temperature)`-weighted mean perturbation and clamps it.
pub fn mppi_plan<M, V, R>(
    model: &M,
    s: &[f64],
    mut value: V,
    cfg: &PlannerConfig,
    prev: Option<&[f64]>,
    rng: &mut R,
) -> Result<PlanResult>
where
    M: EnvModel + ?Sized,
    V: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let d = model.action_dim();
    cfg.validate(d)?;
    check_dim("state", model.state_dim(), s.len())?;
    if let Some(i) = s.iter().position(|x| !x.is_finite()) {
        return Err(Error::ModelFault {
            what: "planner start state",
            index: i,
        });
    }
    let h = cfg.horizon;
    let len = h * d;
    let bounds = model.action_bounds();
    let rollouts = cfg.rollouts_per_iteration()?;

    let mut nominal = match prev {
        Some(p) if cfg.warm_start => shifted(p, len, d),
        _ => vec![0.0; len],
    };
    for chunk in nominal.chunks_exact_mut(d) {
        let raw: Vec<f64> = chunk.to_vec();
        clamp_into(bounds, &raw, chunk);
    }

    let mut state = Vec::with_capacity(s.len());
    let mut next = vec![0.0; s.len()];
    let mut clamped = vec![0.0; d];
    let mut eps = vec![0.0; rollouts * len];
    let mut candidate = vec![0.0; len];
    let mut delta = vec![0.0; len];
    let mut returns = vec![0.0; rollouts];
    let mut weights = vec![0.0; rollouts];
    let mut best = f64::NEG_INFINITY;
    let mut weighted = 0.0;

    for _ in 0..cfg.iterations {
        let g = score(model, s, &nominal, cfg.discount, &mut value, &mut state, &mut next, &mut clamped)?;
        best = best.max(g);

        match &cfg.perturbation {
            Perturbation::Gaussian => gaussian_perturbations(cfg, d, &mut eps, rng),
            Perturbation::Discrete { set } => {
                for chunk in eps.chunks_exact_mut(d) {
                    chunk.copy_from_slice(&set[rng.random_range(0..set.len())]);
                }
            }
            Perturbation::Exhaustive { set } => {
                let k = set.len();
                for (i, seq) in eps.chunks_exact_mut(len).enumerate() {
                    // base-k digits of i, most significant first
                    let mut rem = i;
                    for t in (0..h).rev() {
                        seq[t * d..(t + 1) * d].copy_from_slice(&set[rem % k]);
                        rem /= k;
                    }
                }
            }
        }

        for (i, seq) in eps.chunks_exact(len).enumerate() {
            for ((c, n), e) in candidate.iter_mut().zip(&nominal).zip(seq) {
                *c = n + e;
            }
            returns[i] = score(model, s, &candidate, cfg.discount, &mut value, &mut state, &mut next, &mut clamped)?;
        }

        let max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best = best.max(max);
        let mut total = 0.0;
        for (w, g) in weights.iter_mut().zip(&returns) {
            *w = ((g - max) / cfg.temperature).exp();
            total += *w;
        }
        weighted = 0.0;
        for (w, g) in weights.iter_mut().zip(&returns) {
            *w /= total;
            weighted += *w * g;
        }
        delta.iter_mut().for_each(|x| *x = 0.0);
        for (seq, w) in eps.chunks_exact(len).zip(&weights) {
            for (x, e) in delta.iter_mut().zip(seq) {
                *x += w * e;
            }
        }
        for ((n, x), b) in nominal.iter_mut().zip(&delta).zip(bounds.iter().cycle()) {
            *n = b.clamp(*n + x);
        }
    }

    let nominal: Vec<Action> = nominal.chunks_exact(d).map(|a| Action::new(a.to_vec())).collect();
    Ok(PlanResult {
        first_action: nominal[0].clone(),
        nominal,
        best_return: best,
        weighted_return: weighted,
        weights,
    })
}

/// Fills `eps` (rows of `horizon * d`) with Gaussian perturbations of standard
/// deviation `noise`, each action coordinate an AR(1) process in time with
/// coefficient `smoothing`. With `antithetic`, every second row negates the
/// one before it.
pub fn gaussian_perturbations<R: Rng + ?Sized>(cfg: &PlannerConfig, d: usize, eps: &mut [f64], rng: &mut R) {
    let len = cfg.horizon * d;
    let a = cfg.smoothing;
    let b = (1.0 - a * a).sqrt();
    let mut rows = eps.chunks_exact_mut(len);
    while let Some(row) = rows.next() {
        for e in row.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *e = cfg.noise * z;
        }
        if a > 0.0 {
            for t in d..len {
                row[t] = a * row[t - d] + b * row[t];
            }
        }
        if cfg.antithetic {
            if let Some(mirror) = rows.next() {
                for (m, e) in mirror.iter_mut().zip(row.iter()) {
                    *m = -*e;
                }
            }
        }
    }
}

/// `max` over evaluated `n`-step sequences of discounted reward plus
/// `gamma^n * value(s_n)`, via a cold-started MPPI solve of horizon `n`.
pub fn nstep_target<M, V, R>(model: &M, s: &[f64], value: V, n: usize, cfg: &PlannerConfig, rng: &mut R) -> Result<f64>
where
    M: EnvModel + ?Sized,
    V: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::config("target horizon must be at least 1"));
    }
    let cfg = PlannerConfig {
        horizon: n,
        warm_start: false,
        ..cfg.clone()
    };
    Ok(mppi_plan(model, s, value, &cfg, None, rng)?.best_return)
}

/// Best of the zero action (clamped) and `samples` uniform actions under
/// `r + gamma * value(s')`. Ties go to the earliest candidate.
pub fn greedy_action<M, V, R>(model: &M, s: &[f64], mut value: V, samples: usize, gamma: f64, rng: &mut R) -> Result<Action>
where
    M: EnvModel + ?Sized,
    V: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    check_dim("state", model.state_dim(), s.len())?;
    let bounds = model.action_bounds();
    let d = bounds.len();
    let mut candidate = vec![0.0; d];
    clamp_into(bounds, &vec![0.0; d], &mut candidate);
    let mut next = vec![0.0; s.len()];
    let mut best = candidate.clone();
    let mut best_q = f64::NEG_INFINITY;
    for i in 0..=samples {
        if i > 0 {
            for (c, b) in candidate.iter_mut().zip(bounds) {
                *c = if b.hi > b.lo { rng.random_range(b.lo..=b.hi) } else { b.lo };
            }
        }
        let r = step_into(model, s, &candidate, &mut next)?;
        let v = value(&next);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { state: next.clone() });
        }
        let q = r + gamma * v;
        if q > best_q {
            best_q = q;
            best.copy_from_slice(&candidate);
        }
    }
    Ok(Action::new(best))
}
