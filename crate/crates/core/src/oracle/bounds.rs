use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tabular::{
    bellman_h, mpc_policy_tabular, policy_eval, sup_norm_distance, value_iteration, TabularMDP,
    DEFAULT_SEARCH_BUDGET,
};
use crate::error::{Error, Result};
use crate::rng;

/// Slack for floating-point noise in the gap computation.
const GAP_TOLERANCE: f64 = 1e-9;

/// `2 gamma^H eps / (1 - gamma^H)`; with `H = 1` this is the greedy-policy bound.
pub fn mpc_gap_bound(gamma: f64, horizon: usize, epsilon: f64) -> f64 {
    let gh = gamma.powi(horizon as i32);
    2.0 * gh * epsilon / (1.0 - gh)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckConfig {
    pub trials: usize,
    /// Inclusive range for the number of states of each random MDP.
    pub states: (usize, usize),
    /// Inclusive range for the number of actions.
    pub actions: (usize, usize),
    pub gamma: f64,
    pub epsilon: f64,
    pub horizon: usize,
    /// Uniform perturbations drawn per trial.
    pub uniform_samples: usize,
    /// Also try every `+-eps` sign pattern when the MDP has at most this many
    /// states.
    pub corner_max_states: usize,
    pub search_budget: u64,
    pub seed: u64,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        BoundCheckConfig {
            trials: 100,
            states: (2, 10),
            actions: (2, 3),
            gamma: 0.9,
            epsilon: 0.1,
            horizon: 1,
            uniform_samples: 4,
            corner_max_states: 10,
            search_budget: DEFAULT_SEARCH_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub state: usize,
    pub gap: f64,
    pub bound: f64,
    pub epsilon: f64,
    pub mdp: TabularMDP,
    pub v_hat: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub trials: usize,
    pub gamma: f64,
    pub epsilon: f64,
    #[serde(rename = "H")]
    pub horizon: usize,
    /// Largest `V*(s) - V^pi(s)` seen, i.e. the gap under the worst start state.
    pub max_gap: f64,
    pub bound: f64,
    pub violations: Vec<Violation>,
    pub evaluations: usize,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn perturbations<R: Rng>(v_star: &[f64], cfg: &BoundCheckConfig, rng: &mut R) -> Vec<Vec<f64>> {
    let n = v_star.len();
    let eps = cfg.epsilon;
    let mut out = Vec::new();
    for _ in 0..cfg.uniform_samples {
        out.push(
            v_star
                .iter()
                .map(|v| if eps > 0.0 { v + rng.random_range(-eps..=eps) } else { *v })
                .collect(),
        );
    }
    if n <= cfg.corner_max_states {
        for mask in 0u32..(1u32 << n) {
            out.push(
                v_star
                    .iter()
                    .enumerate()
                    .map(|(s, v)| if mask >> s & 1 == 1 { v + eps } else { v - eps })
                    .collect(),
            );
        }
    }
    out
}

/// Randomized check of the H-step MPC suboptimality bound. Each trial draws a
/// random deterministic MDP, perturbs its optimal value by at most `epsilon`
/// in sup norm, runs exhaustive MPC with the perturbed terminal value, and
/// compares the exact loss `V*(s) - V^pi(s)` at every state against the bound
/// evaluated at the realized error.
pub fn bound_check(cfg: &BoundCheckConfig) -> Result<BoundReport> {
    if cfg.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if cfg.states.0 == 0 || cfg.states.0 > cfg.states.1 || cfg.actions.0 == 0 || cfg.actions.0 > cfg.actions.1 {
        return Err(Error::config("empty state or action range"));
    }
    if !(cfg.epsilon >= 0.0) {
        return Err(Error::config("epsilon must be non-negative"));
    }
    let mut rng = rng::stream(cfg.seed, 0xb0);
    let mut report = BoundReport {
        trials: cfg.trials,
        gamma: cfg.gamma,
        epsilon: cfg.epsilon,
        horizon: cfg.horizon,
        max_gap: 0.0,
        bound: mpc_gap_bound(cfg.gamma, cfg.horizon, cfg.epsilon),
        violations: Vec::new(),
        evaluations: 0,
    };
    for trial in 0..cfg.trials {
        let n = rng.random_range(cfg.states.0..=cfg.states.1);
        let a = rng.random_range(cfg.actions.0..=cfg.actions.1);
        let m = TabularMDP::random(n, a, cfg.gamma, &mut rng)?;
        let v_star = value_iteration(&m, 1e-13)?;
        for v_hat in perturbations(&v_star, cfg, &mut rng) {
            let eps = sup_norm_distance(&v_hat, &v_star);
            let policy = mpc_policy_tabular(&m, &v_hat, cfg.horizon, cfg.search_budget)?;
            let v_pi = policy_eval(&m, &policy)?;
            let bound = mpc_gap_bound(cfg.gamma, cfg.horizon, eps);
            report.evaluations += 1;
            for s in 0..n {
                let gap = v_star[s] - v_pi[s];
                report.max_gap = report.max_gap.max(gap);
                if gap > bound + GAP_TOLERANCE {
                    report.violations.push(Violation {
                        trial,
                        state: s,
                        gap,
                        bound,
                        epsilon: eps,
                        mdp: m.clone(),
                        v_hat: v_hat.clone(),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// The greedy-policy case (`H = 1`) of [`bound_check`].
pub fn greedy_bound_check(cfg: &BoundCheckConfig) -> Result<BoundReport> {
    bound_check(&BoundCheckConfig { horizon: 1, ..cfg.clone() })
}

/// A two-state, two-action MDP with an approximate value whose greedy policy
/// loses `2 gamma eps / (1 - gamma)` from state 1.
///
/// State 0 (`g`) and state 1 (`b`); action 0 moves to `g` with reward 0 and
/// action 1 moves to `b`, with reward 0 from `g` and `-2 gamma eps` (plus a
/// 1e-12 nudge so the wrong choice is strict) from `b`. Both states have
/// optimal value 0. `v_hat = (-eps, +eps)` makes staying in `b` look as good as
/// leaving, so the greedy policy pays `2 gamma eps` on every step.
pub fn greedy_tight_instance(gamma: f64, epsilon: f64) -> Result<(TabularMDP, Vec<f64>)> {
    let nudge = 1e-12;
    let stay_cost = -2.0 * gamma * epsilon + nudge;
    let m = TabularMDP::new(2, 2, vec![0, 1, 0, 1], vec![0.0, 0.0, 0.0, stay_cost], gamma)?;
    Ok((m, vec![-epsilon, epsilon]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub cases: usize,
    pub horizons: Vec<usize>,
    pub violations: usize,
    /// Largest `|B^H V1 - B^H V2| / (gamma^H |V1 - V2|)` seen in float arithmetic.
    pub max_ratio: f64,
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// `B^H V` in exact rational arithmetic on the binary values of the inputs.
/// One exact Bellman backup with the rewards and discount already converted.
fn backup_exact(m: &TabularMDP, rewards: &[BigRational], gamma: &BigRational, v: &[BigRational]) -> Vec<BigRational> {
    let a_n = m.num_actions();
    (0..m.num_states())
        .map(|s| {
            (0..a_n)
                .map(|a| &rewards[s * a_n + a] + gamma * &v[m.next_state(s, a)])
                .max()
                .expect("at least one action")
        })
        .collect()
}

fn sup_distance_exact(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
}

/// Checks `|B^H V1 - B^H V2|_inf <= gamma^H |V1 - V2|_inf` on random MDPs and
/// value pairs. The inequality is decided in exact rational arithmetic, so
/// rounding in a float evaluation can neither hide nor fake a violation.
pub fn contraction_check(cases: usize, horizons: &[usize], gamma: f64, seed: u64) -> Result<ContractionReport> {
    let mut rng = rng::stream(seed, 0xc0);
    let mut report = ContractionReport {
        cases,
        horizons: horizons.to_vec(),
        violations: 0,
        max_ratio: 0.0,
    };
    let gamma_exact = exact(gamma);
    let max_h = horizons.iter().copied().max().unwrap_or(0);
    for _ in 0..cases {
        let n = rng.random_range(2..=10);
        let a = rng.random_range(2..=4);
        let m = TabularMDP::random(n, a, gamma, &mut rng)?;
        let v1: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let v2: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (e1, e2): (Vec<_>, Vec<_>) = v1.iter().zip(&v2).map(|(x, y)| (exact(*x), exact(*y))).unzip();
        let dist = sup_distance_exact(&e1, &e2);
        let rewards: Vec<BigRational> = (0..n)
            .flat_map(|s| (0..a).map(move |b| (s, b)))
            .map(|(s, b)| exact(m.reward(s, b)))
            .collect();
        // walk the iterates once and test each requested horizon on the way
        let (mut t1, mut t2) = (e1, e2);
        let mut gamma_h = BigRational::from_integer(BigInt::from(1));
        for h in 1..=max_h {
            t1 = backup_exact(&m, &rewards, &gamma_exact, &t1);
            t2 = backup_exact(&m, &rewards, &gamma_exact, &t2);
            gamma_h *= &gamma_exact;
            if !horizons.contains(&h) {
                continue;
            }
            if sup_distance_exact(&t1, &t2) > &gamma_h * &dist {
                report.violations += 1;
            }
            let lhs_f = sup_norm_distance(&bellman_h(&m, &v1, h)?, &bellman_h(&m, &v2, h)?);
            let rhs_f = gamma.powi(h as i32) * sup_norm_distance(&v1, &v2);
            if rhs_f > 0.0 {
                report.max_ratio = report.max_ratio.max(lhs_f / rhs_f);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::tabular::greedy_policy;

    #[test]
    fn bound_formula() {
        assert!((mpc_gap_bound(0.9, 1, 0.1) - 1.8).abs() < 1e-12);
        assert!(mpc_gap_bound(0.9, 4, 0.1) < mpc_gap_bound(0.9, 1, 0.1));
    }

    #[test]
    fn tight_instance_hits_the_bound() {
        let (m, v_hat) = greedy_tight_instance(0.9, 0.1).unwrap();
        let v_star = value_iteration(&m, 1e-14).unwrap();
        assert!(v_star.iter().all(|v| v.abs() < 1e-12));
        assert!((sup_norm_distance(&v_hat, &v_star) - 0.1).abs() < 1e-12);
        let v_pi = policy_eval(&m, &greedy_policy(&m, &v_hat)).unwrap();
        let gap = v_star[1] - v_pi[1];
        assert!((gap - 1.8).abs() < 1e-9, "gap {gap}");
    }

    #[test]
    fn zero_epsilon_has_zero_gap() {
        let r = greedy_bound_check(&BoundCheckConfig {
            epsilon: 0.0,
            trials: 20,
            corner_max_states: 0,
            ..Default::default()
        })
        .unwrap();
        assert!(r.passed());
        assert!(r.max_gap.abs() < 1e-9);
    }

    #[test]
    fn small_greedy_check_passes() {
        let r = greedy_bound_check(&BoundCheckConfig {
            trials: 10,
            states: (2, 6),
            ..Default::default()
        })
        .unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        assert!(r.max_gap <= 1.8 + 1e-9);
    }

    #[test]
    fn contraction_holds_on_a_few_cases() {
        let r = contraction_check(50, &[1, 2, 3], 0.9, 1).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.max_ratio <= 1.0 + 1e-12);
    }
}
