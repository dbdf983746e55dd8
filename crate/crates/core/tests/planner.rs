use std::cell::Cell;

use polo_core::envs::{GridWorld, PointMassWorld};
use polo_core::mdp::{Bounds, EnvModel, Extent, ZeroReward};
use polo_core::oracle::{bellman_h, greedy_policy, value_iteration, TabularMDP};
use polo_core::planner::{gaussian_perturbations, greedy_action, mppi_plan, nstep_target, Perturbation, PlannerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// x' = x + v', v' = v + a, reward -x'^2.
struct DoubleIntegrator;

const UNIT: [Bounds; 1] = [Bounds::symmetric(1.0)];
const WIDE: [Bounds; 2] = [Bounds::symmetric(10.0), Bounds::symmetric(10.0)];

impl EnvModel for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }
    fn action_bounds(&self) -> &[Bounds] {
        &UNIT
    }
    fn discount(&self) -> f64 {
        0.9
    }
    fn state_ranges(&self) -> &[Bounds] {
        &WIDE
    }
    fn transition(&self, s: &[f64], a: &[f64], next: &mut [f64]) -> f64 {
        next[1] = s[1] + a[0];
        next[0] = s[0] + next[1];
        -next[0] * next[0]
    }
}

/// Counts transitions whose action lies outside the bounds.
struct Watch<M> {
    inner: M,
    calls: Cell<usize>,
    outside: Cell<usize>,
}

impl<M: EnvModel> EnvModel for Watch<M> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn action_bounds(&self) -> &[Bounds] {
        self.inner.action_bounds()
    }
    fn discount(&self) -> f64 {
        self.inner.discount()
    }
    fn state_ranges(&self) -> &[Bounds] {
        self.inner.state_ranges()
    }
    fn transition(&self, s: &[f64], a: &[f64], next: &mut [f64]) -> f64 {
        self.calls.set(self.calls.get() + 1);
        if a.iter().zip(self.inner.action_bounds()).any(|(x, b)| !b.contains(*x)) {
            self.outside.set(self.outside.get() + 1);
        }
        self.inner.transition(s, a, next)
    }
}

fn box_world() -> PointMassWorld {
    PointMassWorld::open_box(Extent::unit()).validated().unwrap()
}

fn rollout_return<M: EnvModel>(m: &M, s: &[f64], actions: &[f64], gamma: f64, value: impl Fn(&[f64]) -> f64) -> f64 {
    let d = m.action_dim();
    let mut state = s.to_vec();
    let mut next = vec![0.0; s.len()];
    let mut total = 0.0;
    let mut disc = 1.0;
    for a in actions.chunks(d) {
        let clamped: Vec<f64> = a.iter().zip(m.action_bounds()).map(|(x, b)| b.clamp(*x)).collect();
        total += disc * m.transition(&state, &clamped, &mut next);
        disc *= gamma;
        std::mem::swap(&mut state, &mut next);
    }
    total + disc * value(&state)
}

#[test]
fn no_signal_gives_uniform_weights_and_a_small_move() {
    let world = ZeroReward(box_world());
    let s = world.0.start_state();
    let mean_move = |rollouts: usize| {
        let cfg = PlannerConfig {
            horizon: 4,
            rollouts,
            antithetic: false,
            ..PlannerConfig::default()
        };
        let mut total = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = mppi_plan(&world, s.as_slice(), |_: &[f64]| 0.0, &cfg, None, &mut rng).unwrap();
            for w in &plan.weights {
                assert_eq!(*w, 1.0 / rollouts as f64);
            }
            let n = plan.flat_nominal();
            total += n.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        total / 20.0
    };
    let few = mean_move(10);
    let many = mean_move(1000);
    assert!(many < few / 3.0, "{many} vs {few}");

    let paired = PlannerConfig {
        horizon: 4,
        rollouts: 10,
        ..PlannerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plan = mppi_plan(&world, s.as_slice(), |_: &[f64]| 0.0, &paired, None, &mut rng).unwrap();
    assert!(plan.flat_nominal().iter().all(|x| *x == 0.0));
}

#[test]
fn exhaustive_double_integrator_matches_brute_force() {
    let set = vec![vec![-1.0], vec![0.0], vec![1.0]];
    let cfg = PlannerConfig {
        horizon: 2,
        temperature: 1e-8,
        discount: 0.9,
        perturbation: Perturbation::Exhaustive { set: set.clone() },
        ..PlannerConfig::default()
    };
    for start in [[1.0, 0.3], [-0.7, 0.9], [2.5, -0.4]] {
        let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
        let mut second = f64::NEG_INFINITY;
        for a in &set {
            for b in &set {
                let g = rollout_return(&DoubleIntegrator, &start, &[a[0], b[0]], 0.9, |_| 0.0);
                if g > best.0 {
                    second = best.0;
                    best = (g, [a[0], b[0]]);
                } else if g > second {
                    second = g;
                }
            }
        }
        assert!(best.0 - second > 1e-6, "oracle needs a unique optimum");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = mppi_plan(&DoubleIntegrator, &start, |_: &[f64]| 0.0, &cfg, None, &mut rng).unwrap();
        assert_eq!(plan.flat_nominal(), best.1.to_vec());
        assert!((plan.best_return - best.0).abs() < 1e-12);
    }
}

#[test]
fn tiny_temperature_moves_the_nominal_onto_the_best_rollout() {
    let world = box_world();
    let s = [0.3, 0.6, 0.2, -0.1];
    let value = |x: &[f64]| -((x[0] - 0.8).powi(2) + (x[1] - 0.2).powi(2));
    let cfg = PlannerConfig {
        horizon: 6,
        rollouts: 40,
        noise: 0.5,
        temperature: 1e-8,
        antithetic: false,
        ..PlannerConfig::default()
    };
    let len = cfg.horizon * 2;
    let mut replay = ChaCha8Rng::seed_from_u64(21);
    let eps: Vec<Vec<f64>> = (0..cfg.rollouts)
        .map(|_| {
            (0..len)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut replay);
                    cfg.noise * z
                })
                .collect()
        })
        .collect();
    let returns: Vec<f64> = eps
        .iter()
        .map(|e| rollout_return(&world, &s, e, cfg.discount, value))
        .collect();
    let best = (0..returns.len()).max_by(|&a, &b| returns[a].total_cmp(&returns[b])).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let plan = mppi_plan(&world, &s, value, &cfg, None, &mut rng).unwrap();
    let expected: Vec<f64> = eps[best].iter().map(|x| x.clamp(-1.0, 1.0)).collect();
    for (a, b) in plan.flat_nominal().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert!((plan.weights[best] - 1.0).abs() < 1e-9);
}

#[test]
fn one_step_target_with_constant_value_is_discounted_constant() {
    let world = ZeroReward(box_world());
    let cfg = PlannerConfig {
        rollouts: 8,
        ..PlannerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for c in [-3.0, 0.0, 2.5] {
        let y = nstep_target(&world, &[0.5, 0.5, 0.0, 0.0], |_: &[f64]| c, 1, &cfg, &mut rng).unwrap();
        assert_eq!(y, cfg.discount * c);
    }
}

fn random_grid(seed: u64) -> (GridWorld, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = GridWorld::with_goal(5, 4, (4, 3), 0.9).unwrap();
    for r in g.rewards.iter_mut() {
        *r = rng.random_range(-1.0..1.0);
    }
    g.obstacles[7] = true;
    g.obstacles[12] = true;
    let g = g.validated().unwrap();
    let v: Vec<f64> = (0..g.num_states()).map(|_| rng.random_range(-5.0..5.0)).collect();
    (g, v)
}

#[test]
fn exhaustive_targets_equal_tabular_backups() {
    let (grid, v) = random_grid(5);
    let tab = grid.to_tabular();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 1..=3 {
        let backed = bellman_h(&tab, &v, n).unwrap();
        let cfg = PlannerConfig {
            discount: grid.discount,
            perturbation: Perturbation::Exhaustive {
                set: GridWorld::action_embeddings(),
            },
            ..PlannerConfig::default()
        };
        for _ in 0..20 {
            let i = rng.random_range(0..grid.num_states());
            let s = grid.state_of(i);
            let y = nstep_target(&grid, s.as_slice(), |x: &[f64]| v[grid.index_of(x).unwrap()], n, &cfg, &mut rng).unwrap();
            assert!((y - backed[i]).abs() < 1e-9, "N={n} state {i}: {y} vs {}", backed[i]);
        }
    }
}

#[test]
fn target_is_at_least_the_zero_sequence_return() {
    let world = box_world();
    let value = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1] - 0.1 * x[2];
    let cfg = PlannerConfig {
        rollouts: 16,
        ..PlannerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let s = [rng.random::<f64>(), rng.random::<f64>(), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = rng.random_range(1..10);
        let zero = rollout_return(&world, &s, &vec![0.0; 2 * n], cfg.discount, value);
        let y = nstep_target(&world, &s, value, n, &cfg, &mut rng).unwrap();
        assert!(y >= zero);
    }
}

#[test]
fn greedy_with_optimal_values_is_optimal() {
    let (grid, _) = random_grid(9);
    let tab: TabularMDP = grid.to_tabular();
    let v_star = value_iteration(&tab, 1e-12).unwrap();
    let oracle = greedy_policy(&tab, &v_star);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..grid.num_states() {
        let s = grid.state_of(i);
        let a = greedy_action(&grid, s.as_slice(), |x: &[f64]| v_star[grid.index_of(x).unwrap()], 256, grid.discount, &mut rng).unwrap();
        let chosen = polo_core::envs::GridAction::decode(a.as_slice()[0]).index();
        let q = tab.q(&v_star, i, chosen);
        let best = tab.q(&v_star, i, oracle[i]);
        assert!((q - best).abs() < 1e-9, "state {i}: {q} vs {best}");
    }
}

#[test]
fn every_simulated_action_is_clamped() {
    let world = Watch {
        inner: box_world(),
        calls: Cell::new(0),
        outside: Cell::new(0),
    };
    let cfg = PlannerConfig {
        horizon: 8,
        rollouts: 30,
        noise: 5.0,
        iterations: 3,
        temperature: 0.01,
        ..PlannerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut prev = None;
    let mut s = vec![0.5, 0.5, 0.0, 0.0];
    for _ in 0..10 {
        let plan = mppi_plan(&world, &s, |x: &[f64]| x[0], &cfg, prev.as_deref(), &mut rng).unwrap();
        for a in &plan.nominal {
            assert!(a.as_slice().iter().all(|x| (-1.0..=1.0).contains(x)));
        }
        prev = Some(plan.flat_nominal());
        let mut next = vec![0.0; 4];
        world.inner.transition(&s, plan.first_action.as_slice(), &mut next);
        s = next;
    }
    assert!(world.calls.get() > 0);
    assert_eq!(world.outside.get(), 0);
}

#[test]
fn weights_survive_huge_returns() {
    let cfg = PlannerConfig {
        horizon: 3,
        rollouts: 12,
        ..PlannerConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let plan = mppi_plan(&box_world(), &[0.5, 0.5, 0.0, 0.0], |x: &[f64]| 1e300 * x[0], &cfg, None, &mut rng).unwrap();
    assert!(plan.weights.iter().all(|w| w.is_finite() && *w >= 0.0));
    assert!((plan.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn same_seed_same_plan() {
    let cfg = PlannerConfig {
        horizon: 10,
        rollouts: 20,
        ..PlannerConfig::default()
    };
    let world = box_world();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        mppi_plan(&world, &[0.2, 0.4, 0.1, 0.0], |x: &[f64]| x[1], &cfg, None, &mut rng).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn smoothed_perturbations_keep_their_marginal_and_correlate_in_time() {
    let cfg = PlannerConfig {
        horizon: 40,
        rollouts: 4000,
        noise: 0.7,
        smoothing: 0.8,
        antithetic: false,
        ..PlannerConfig::default()
    };
    let d = 2;
    let len = cfg.horizon * d;
    let mut eps = vec![0.0; cfg.rollouts * len];
    gaussian_perturbations(&cfg, d, &mut eps, &mut ChaCha8Rng::seed_from_u64(4));
    let rows = eps.chunks_exact(len);
    let n = rows.len() as f64;
    for t in [0, 1, 20, 39] {
        for j in 0..d {
            let var = rows.clone().map(|r| r[t * d + j].powi(2)).sum::<f64>() / n;
            assert!((var / (cfg.noise * cfg.noise) - 1.0).abs() < 0.08, "t={t} j={j} var={var}");
        }
    }
    let lag = |t: usize, j: usize, k: usize| {
        rows.clone().map(|r| r[t * d + j] * r[(t + 1) * d + k]).sum::<f64>() / n / (cfg.noise * cfg.noise)
    };
    for t in [0, 10, 38] {
        assert!((lag(t, 0, 0) - 0.8).abs() < 0.05);
        assert!((lag(t, 1, 1) - 0.8).abs() < 0.05);
        assert!(lag(t, 0, 1).abs() < 0.06);
    }

    let mirrored = PlannerConfig {
        antithetic: true,
        rollouts: 4,
        ..cfg
    };
    let mut eps = vec![0.0; 4 * len];
    gaussian_perturbations(&mirrored, d, &mut eps, &mut ChaCha8Rng::seed_from_u64(4));
    for pair in eps.chunks_exact(2 * len) {
        assert!(pair[..len].iter().zip(&pair[len..]).all(|(a, b)| *a == -*b));
    }
}
