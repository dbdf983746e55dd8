use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const DEFAULT_SEARCH_BUDGET: u64 = 1_000_000;

pub type TabularValue = Vec<f64>;
pub type TabularPolicy = Vec<usize>;

/// Deterministic finite MDP. Transition and reward tables are row-major in
/// `(state, action)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMDP {
    num_states: usize,
    num_actions: usize,
    next_state: Vec<usize>,
    reward: Vec<f64>,
    gamma: f64,
}

impl TabularMDP {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        next_state: Vec<usize>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::config("MDP needs at least one state and one action"));
        }
        check_dim("transition table", num_states * num_actions, next_state.len())?;
        check_dim("reward table", num_states * num_actions, reward.len())?;
        if let Some(&bad) = next_state.iter().find(|&&s| s >= num_states) {
            return Err(Error::OutOfRange {
                index: bad,
                len: num_states,
            });
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::config("discount must lie in [0, 1)"));
        }
        Ok(TabularMDP {
            num_states,
            num_actions,
            next_state,
            reward,
            gamma,
        })
    }

    /// Uniformly random successors and rewards in `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, gamma: f64, rng: &mut R) -> Result<Self> {
        let n = num_states * num_actions;
        let next = (0..n).map(|_| rng.random_range(0..num_states.max(1))).collect();
        let reward = (0..n).map(|_| rng.random::<f64>()).collect();
        Self::new(num_states, num_actions, next, reward, gamma)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn next_state(&self, s: usize, a: usize) -> usize {
        self.next_state[s * self.num_actions + a]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    #[inline]
    pub fn q(&self, v: &[f64], s: usize, a: usize) -> f64 {
        self.reward(s, a) + self.gamma * v[self.next_state(s, a)]
    }
}

pub fn sup_norm_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// One application of the Bellman optimality operator.
pub fn bellman(m: &TabularMDP, v: &[f64]) -> TabularValue {
    (0..m.num_states)
        .map(|s| {
            (0..m.num_actions)
                .map(|a| m.q(v, s, a))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Iterates the Bellman operator from zero until successive iterates differ by
/// less than `tol (1 - gamma) / gamma` in sup norm, which puts the result
/// within `tol` of the optimal value.
pub fn value_iteration(m: &TabularMDP, tol: f64) -> Result<TabularValue> {
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    let mut v = vec![0.0; m.num_states];
    if m.gamma == 0.0 {
        return Ok(bellman(m, &v));
    }
    let stop = tol * (1.0 - m.gamma) / m.gamma;
    loop {
        let next = bellman(m, &v);
        let delta = sup_norm_distance(&next, &v);
        v = next;
        if delta < stop {
            return Ok(v);
        }
    }
}

/// `B^H V` by `H` successive applications of the Bellman operator.
pub fn bellman_h(m: &TabularMDP, v: &[f64], horizon: usize) -> Result<TabularValue> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    check_dim("value", m.num_states, v.len())?;
    let mut out = v.to_vec();
    for _ in 0..horizon {
        out = bellman(m, &out);
    }
    Ok(out)
}

fn sequence_count(m: &TabularMDP, horizon: usize, budget: u64) -> Result<()> {
    let count = (m.num_actions as u128).checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if count > budget as u128 {
        return Err(Error::Budget { count, budget });
    }
    Ok(())
}

/// Best score over all action sequences from `s`, with the lexicographically
/// smallest maximizing first action. Scores accumulate forward as
/// `sum gamma^t r_t + gamma^H V(s_H)`.
fn search_from(m: &TabularMDP, v: &[f64], s: usize, horizon: usize) -> (f64, usize) {
    fn go(m: &TabularMDP, v: &[f64], s: usize, depth: usize, disc: f64, acc: f64, best: &mut f64) {
        if depth == 0 {
            let score = acc + disc * v[s];
            if score > *best {
                *best = score;
            }
            return;
        }
        for a in 0..m.num_actions {
            go(m, v, m.next_state(s, a), depth - 1, disc * m.gamma, acc + disc * m.reward(s, a), best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_first = 0;
    for a in 0..m.num_actions {
        let mut sub = f64::NEG_INFINITY;
        go(m, v, m.next_state(s, a), horizon - 1, m.gamma, m.reward(s, a), &mut sub);
        if sub > best {
            best = sub;
            best_first = a;
        }
    }
    (best, best_first)
}

/// `B^H V` by exhaustive search over all `|A|^H` action sequences.
pub fn bellman_h_search(m: &TabularMDP, v: &[f64], horizon: usize, budget: u64) -> Result<TabularValue> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    check_dim("value", m.num_states, v.len())?;
    sequence_count(m, horizon, budget)?;
    Ok((0..m.num_states).map(|s| search_from(m, v, s, horizon).0).collect())
}

/// Exhaustive H-step MPC with terminal value `v_hat`: in every state, the first
/// action of the best sequence, ties broken toward the lexicographically
/// smallest sequence.
pub fn mpc_policy_tabular(m: &TabularMDP, v_hat: &[f64], horizon: usize, budget: u64) -> Result<TabularPolicy> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    check_dim("value", m.num_states, v_hat.len())?;
    sequence_count(m, horizon, budget)?;
    Ok((0..m.num_states).map(|s| search_from(m, v_hat, s, horizon).1).collect())
}

/// Greedy one-step policy, ties to the lowest action index.
pub fn greedy_policy(m: &TabularMDP, v: &[f64]) -> TabularPolicy {
    (0..m.num_states)
        .map(|s| {
            let mut best = 0;
            for a in 1..m.num_actions {
                if m.q(v, s, a) > m.q(v, s, best) {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Iterative policy evaluation to a sup-norm accuracy of 1e-12.
pub fn policy_eval(m: &TabularMDP, policy: &[usize]) -> Result<TabularValue> {
    check_dim("policy", m.num_states, policy.len())?;
    if let Some(&bad) = policy.iter().find(|&&a| a >= m.num_actions) {
        return Err(Error::OutOfRange {
            index: bad,
            len: m.num_actions,
        });
    }
    let mut v = vec![0.0; m.num_states];
    let stop = if m.gamma == 0.0 {
        f64::INFINITY
    } else {
        1e-12 * (1.0 - m.gamma) / m.gamma
    };
    loop {
        let next: Vec<f64> = (0..m.num_states).map(|s| m.q(&v, s, policy[s])).collect();
        let delta = sup_norm_distance(&next, &v);
        v = next;
        if delta < stop || delta == 0.0 {
            return Ok(v);
        }
    }
}

/// `J^beta = sum_s beta(s) V(s)`.
pub fn performance(v: &[f64], beta: &[f64]) -> Result<f64> {
    check_dim("start distribution", v.len(), beta.len())?;
    Ok(v.iter().zip(beta).map(|(x, b)| x * b).sum())
}
