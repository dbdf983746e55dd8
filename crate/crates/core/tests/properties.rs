use polo_core::envs::{GridAction, GridWorld, PointMassWorld, Wall};
use polo_core::mdp::{discounted_return, step, Action, EnvModel, Extent, State};
use polo_core::oracle::{
    bellman, bellman_h, bellman_h_search, mpc_gap_bound, mpc_policy_tabular, performance, policy_eval, sup_norm_distance,
    value_iteration, TabularMDP, DEFAULT_SEARCH_BUDGET,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn maze() -> PointMassWorld {
    PointMassWorld::pinwheel_maze().validated().unwrap()
}

/// Motion is resolved one axis at a time (x, then y), so the swept path is the
/// two legs `p -> (q.x, p.y) -> q`.
fn check_segment(walls: &[Wall], extent: &Extent, p: [f64; 2], q: [f64; 2]) {
    assert!(extent.contains(q), "left the extent at {q:?}");
    let corner = [q[0], p[1]];
    for w in walls {
        assert!(!w.crosses(p, corner) && !w.crosses(corner, q), "{p:?} -> {q:?} crosses {w:?}");
    }
}

#[test]
fn point_mass_never_crosses_walls() {
    let world = maze();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut s = world.start_state();
    for i in 0..100_000 {
        // every few hundred steps jump to a state hugging a wall, moving into it
        if i % 500 == 0 {
            let w = world.walls[rng.random_range(0..world.walls.len())];
            let (a, b) = w.endpoints();
            let t = rng.random::<f64>();
            let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let axis = if w.is_vertical() { 0 } else { 1 };
            p[axis] += side * 1e-5;
            let mut v = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            v[axis] = -side * 2.5;
            let candidate = State::new(vec![p[0], p[1], v[0], v[1]]).unwrap();
            if world.extent.contains(p) && world.walls.iter().all(|w| !w.crosses(p, p)) {
                s = candidate;
            }
        }
        let a = Action::new(vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]);
        let (next, _) = step(&world, &s, &a).unwrap();
        let p = world.position(s.as_slice()).unwrap();
        let q = world.position(next.as_slice()).unwrap();
        check_segment(&world.walls, &world.extent, p, q);
        s = next;
    }
}

#[test]
fn gridworld_export_agrees_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (w, h) = (rng.random_range(1..8), rng.random_range(1..8));
        let mut g = GridWorld::with_goal(w, h, (0, 0), 0.9).unwrap();
        for c in 1..w * h {
            g.obstacles[c] = rng.random_bool(0.2);
            g.rewards[c] = rng.random_range(-2.0..1.0);
        }
        let g = g.validated().unwrap();
        let tab = g.to_tabular();
        for i in 0..g.num_states() {
            for act in GridAction::ALL {
                let (next, r) = step(&g, &g.state_of(i), &Action::new(vec![act.embedding()])).unwrap();
                assert_eq!(g.index_of(next.as_slice()).unwrap(), tab.next_state(i, act.index()));
                assert_eq!(r, tab.reward(i, act.index()));
            }
        }
    }
}

#[test]
fn mpc_with_exact_values_never_gets_worse_with_horizon() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let n = rng.random_range(2..9);
        let m = TabularMDP::random(n, 3, 0.9, &mut rng).unwrap();
        let v_star = value_iteration(&m, 1e-12).unwrap();
        let beta = vec![1.0 / n as f64; n];
        let mut last = f64::NEG_INFINITY;
        for h in 1..=4 {
            let pi = mpc_policy_tabular(&m, &v_star, h, DEFAULT_SEARCH_BUDGET).unwrap();
            let j = performance(&policy_eval(&m, &pi).unwrap(), &beta).unwrap();
            assert!(j >= last - 1e-9);
            last = j;
        }
    }
}

#[test]
fn h_step_bound_is_tighter_than_one_step_bound() {
    for h in 1..=10 {
        assert!(mpc_gap_bound(0.9, h, 0.1) <= mpc_gap_bound(0.9, 1, 0.1));
    }
}

proptest! {
    #[test]
    fn discounted_return_is_linear(
        r1 in prop::collection::vec(-10.0f64..10.0, 0..20),
        seed in 0u64..1000,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        v1 in -10.0f64..10.0,
        v2 in -10.0f64..10.0,
        gamma in 0.0f64..0.999,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r2: Vec<f64> = r1.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
        let mixed: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
        let lhs = discounted_return(&mixed, gamma, a * v1 + b * v2).unwrap();
        let rhs = a * discounted_return(&r1, gamma, v1).unwrap() + b * discounted_return(&r2, gamma, v2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs() + rhs.abs()));
    }

    #[test]
    fn point_mass_step_is_deterministic_and_in_bounds(
        x in 0.0f64..1.0, y in 0.0f64..1.0,
        vx in -2.5f64..2.5, vy in -2.5f64..2.5,
        ax in -3.0f64..3.0, ay in -3.0f64..3.0,
    ) {
        let world = maze();
        let p = [x, y];
        prop_assume!(world.walls.iter().all(|w| !w.crosses(p, p)));
        let s = State::new(vec![x, y, vx, vy]).unwrap();
        let a = Action::new(vec![ax, ay]);
        let first = step(&world, &s, &a).unwrap();
        let second = step(&world, &s, &a).unwrap();
        prop_assert_eq!(&first, &second);
        check_segment(&world.walls, &world.extent, p, [first.0.as_slice()[0], first.0.as_slice()[1]]);
    }

    #[test]
    fn backups_agree_and_contract(seed in 0u64..500, h in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..8);
        let m = TabularMDP::random(n, rng.random_range(1..4), 0.9, &mut rng).unwrap();
        let v1: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v2: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let folded = bellman_h(&m, &v1, h).unwrap();
        let searched = bellman_h_search(&m, &v1, h, DEFAULT_SEARCH_BUDGET).unwrap();
        prop_assert!(sup_norm_distance(&folded, &searched) <= 1e-12);
        let one = bellman(&m, &v1);
        if h == 1 {
            prop_assert_eq!(&folded, &one);
        }
        let d = sup_norm_distance(&folded, &bellman_h(&m, &v2, h).unwrap());
        prop_assert!(d <= 0.9f64.powi(h as i32) * sup_norm_distance(&v1, &v2) * (1.0 + 1e-12));
    }
}
