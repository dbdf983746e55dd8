//! Planar point mass among axis-aligned walls.
//!
//! State is `(x, y, vx, vy)`, action is a force direction in `[-1, 1]^2`.
//! Integration is semi-implicit Euler with per-step velocity damping. Motion is
//! resolved one axis at a time (x, then y); a move that would reach a wall stops
//! [`WALL_MARGIN`] short of it and zeroes that velocity component.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Bounds, EnvModel, Extent, State};

/// Gap kept between the mass and any wall it is pushed against.
pub const WALL_MARGIN: f64 = 1e-6;

/// Largest speed the declared state ranges assume, in m/s.
const SPEED_RANGE: f64 = 3.0;

const ACTION_BOUNDS: [Bounds; 2] = [Bounds::symmetric(1.0), Bounds::symmetric(1.0)];

/// Axis-aligned wall segment, written `[x1, y1, x2, y2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Wall {
    a: [f64; 2],
    b: [f64; 2],
}

impl Wall {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if [x1, y1, x2, y2].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("wall coordinate"));
        }
        if x1 != x2 && y1 != y2 {
            return Err(Error::config("walls must be axis-aligned"));
        }
        Ok(Wall {
            a: [x1.min(x2), y1.min(y2)],
            b: [x1.max(x2), y1.max(y2)],
        })
    }

    pub fn vertical(x: f64, y1: f64, y2: f64) -> Self {
        Wall::new(x, y1, x, y2).expect("vertical wall")
    }

    pub fn horizontal(y: f64, x1: f64, x2: f64) -> Self {
        Wall::new(x1, y, x2, y).expect("horizontal wall")
    }

    pub fn is_vertical(&self) -> bool {
        self.a[0] == self.b[0]
    }

    pub fn endpoints(&self) -> ([f64; 2], [f64; 2]) {
        (self.a, self.b)
    }

    /// Proper intersection with the segment `p -> q`.
    pub fn crosses(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        segments_intersect(self.a, self.b, p, q)
    }
}

impl TryFrom<[f64; 4]> for Wall {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Wall::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Wall> for [f64; 4] {
    fn from(w: Wall) -> Self {
        [w.a[0], w.a[1], w.b[0], w.b[1]]
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RewardSpec {
    /// Every reward is exactly zero.
    None,
    /// `bonus` whenever the position is within `radius` of `center`, else zero.
    SparseGoal { center: [f64; 2], radius: f64, bonus: f64 },
    /// Negative Euclidean distance to `center`.
    DenseGoal { center: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassWorld {
    pub extent: Extent,
    #[serde(default)]
    pub walls: Vec<Wall>,
    #[serde(default = "defaults::mass")]
    pub mass: f64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::damping")]
    pub damping: f64,
    #[serde(default = "defaults::force_scale")]
    pub force_scale: f64,
    #[serde(default = "defaults::reward_spec")]
    pub reward_spec: RewardSpec,
    #[serde(default = "defaults::discount")]
    pub discount: f64,
    /// Initial position; the extent's center when absent.
    #[serde(default)]
    pub start: Option<[f64; 2]>,
    #[serde(skip)]
    ranges: Option<[Bounds; 4]>,
}

mod defaults {
    use super::RewardSpec;

    pub fn mass() -> f64 {
        1.0
    }
    pub fn dt() -> f64 {
        0.02
    }
    pub fn damping() -> f64 {
        0.1
    }
    /// Terminal speed under full force is `dt * force_scale / (mass * damping)`
    /// = 2.5 m/s, i.e. one 0.05 m cell of the default grid per step.
    pub fn force_scale() -> f64 {
        12.5
    }
    pub fn reward_spec() -> RewardSpec {
        RewardSpec::None
    }
    pub fn discount() -> f64 {
        0.99
    }
}

impl PointMassWorld {
    /// Empty box with default dynamics and no reward.
    pub fn open_box(extent: Extent) -> Self {
        PointMassWorld {
            extent,
            walls: Vec::new(),
            mass: defaults::mass(),
            dt: defaults::dt(),
            damping: defaults::damping(),
            force_scale: defaults::force_scale(),
            reward_spec: RewardSpec::None,
            discount: defaults::discount(),
            start: None,
            ranges: None,
        }
        .validated()
        .expect("default box is valid")
    }

    /// Pinwheel maze in the unit box: a 0.2 m central hub with four L-shaped
    /// corridors of width 0.1 m, one per side, each turning once.
    pub fn pinwheel_maze() -> Self {
        let mut world = Self::open_box(Extent::unit());
        world.walls = walls_from_free_cells(Extent::unit(), 10, 10, &pinwheel_cells());
        world.start = Some([0.5, 0.5]);
        world.validated().expect("maze is valid")
    }

    pub fn with_reward(mut self, reward_spec: RewardSpec) -> Self {
        self.reward_spec = reward_spec;
        self
    }

    /// Checks parameters and caches the declared state ranges. Must be called
    /// after deserializing or editing fields.
    pub fn validated(mut self) -> Result<Self> {
        let positive = [("mass", self.mass), ("dt", self.dt), ("force_scale", self.force_scale)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(alloc::format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::config("damping must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("discount must lie in [0, 1)"));
        }
        if !(self.extent.width() > 0.0 && self.extent.height() > 0.0) {
            return Err(Error::config("extent must have positive area"));
        }
        if let Some(p) = self.start {
            if !self.extent.contains(p) {
                return Err(Error::config("start must lie inside the extent"));
            }
        }
        self.ranges = Some([
            Bounds::new(self.extent.min[0], self.extent.max[0]),
            Bounds::new(self.extent.min[1], self.extent.max[1]),
            Bounds::symmetric(SPEED_RANGE),
            Bounds::symmetric(SPEED_RANGE),
        ]);
        Ok(self)
    }

    pub fn start_state(&self) -> State {
        let p = self.start.unwrap_or_else(|| self.extent.center());
        State::new(alloc::vec![p[0], p[1], 0.0, 0.0]).expect("finite start")
    }

    /// Moves along one axis from `from` to `to`, stopping short of the extent
    /// and of every wall perpendicular to that axis whose span contains
    /// `cross` (the other coordinate).
    fn sweep(&self, axis: usize, from: f64, to: f64, cross: f64) -> f64 {
        let lo = self.extent.min[axis] + WALL_MARGIN;
        let hi = self.extent.max[axis] - WALL_MARGIN;
        let mut to = to.max(lo.min(from)).min(hi.max(from));
        for w in &self.walls {
            // Walls perpendicular to the axis: vertical walls block x motion.
            if w.is_vertical() != (axis == 0) {
                continue;
            }
            let other = 1 - axis;
            if cross < w.a[other] || cross > w.b[other] {
                continue;
            }
            let c = w.a[axis];
            if from < c {
                let limit = c - WALL_MARGIN;
                to = to.min(limit.max(from));
            } else if from > c {
                let limit = c + WALL_MARGIN;
                to = to.max(limit.min(from));
            }
        }
        to
    }

    fn reward_at(&self, p: [f64; 2]) -> f64 {
        match self.reward_spec {
            RewardSpec::None => 0.0,
            RewardSpec::SparseGoal { center, radius, bonus } => {
                let d = (p[0] - center[0]).hypot(p[1] - center[1]);
                if d <= radius {
                    bonus
                } else {
                    0.0
                }
            }
            RewardSpec::DenseGoal { center } => -(p[0] - center[0]).hypot(p[1] - center[1]),
        }
    }
}

impl EnvModel for PointMassWorld {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_bounds(&self) -> &[Bounds] {
        &ACTION_BOUNDS
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn state_ranges(&self) -> &[Bounds] {
        self.ranges.as_ref().expect("PointMassWorld::validated not called")
    }

    fn transition(&self, s: &[f64], a: &[f64], next: &mut [f64]) -> f64 {
        let keep = 1.0 - self.damping;
        let gain = self.dt * self.force_scale / self.mass;
        let mut vx = keep * s[2] + gain * a[0];
        let mut vy = keep * s[3] + gain * a[1];
        let tx = s[0] + self.dt * vx;
        let x = self.sweep(0, s[0], tx, s[1]);
        if x != tx {
            vx = 0.0;
        }
        let ty = s[1] + self.dt * vy;
        let y = self.sweep(1, s[1], ty, x);
        if y != ty {
            vy = 0.0;
        }
        next[0] = x;
        next[1] = y;
        next[2] = vx;
        next[3] = vy;
        self.reward_at([x, y])
    }

    fn position(&self, s: &[f64]) -> Option<[f64; 2]> {
        Some([s[0], s[1]])
    }

    fn workspace(&self) -> Option<Extent> {
        Some(self.extent)
    }
}

/// Free cells `(column, row)` of the 10x10 pinwheel maze.
pub fn pinwheel_cells() -> Vec<(usize, usize)> {
    let hub = [(4, 4), (5, 4), (4, 5), (5, 5)];
    let east_arm = [(6, 4), (7, 4), (8, 4), (8, 5), (8, 6), (8, 7), (8, 8), (7, 8)];
    let mut cells: Vec<(usize, usize)> = hub.to_vec();
    let mut arm = east_arm.to_vec();
    for _ in 0..4 {
        cells.extend_from_slice(&arm);
        // quarter turn counter-clockwise about the grid center
        arm = arm.iter().map(|&(c, r)| (9 - r, c)).collect();
    }
    cells
}

/// Wall segments separating free cells from blocked cells (or the outside) on
/// a `cols x rows` grid over `extent`. Collinear unit edges are merged.
pub fn walls_from_free_cells(extent: Extent, cols: usize, rows: usize, free: &[(usize, usize)]) -> Vec<Wall> {
    let mut mask = alloc::vec![false; cols * rows];
    for &(c, r) in free {
        mask[r * cols + c] = true;
    }
    let is_free = |c: isize, r: isize| -> bool {
        c >= 0 && r >= 0 && (c as usize) < cols && (r as usize) < rows && mask[r as usize * cols + c as usize]
    };
    let cw = extent.width() / cols as f64;
    let rh = extent.height() / rows as f64;
    let mut walls = Vec::new();
    // horizontal edges between row r-1 and row r
    for r in 0..=rows as isize {
        let mut run: Option<usize> = None;
        for c in 0..=cols as isize {
            let edge = c < cols as isize && is_free(c, r - 1) != is_free(c, r);
            match (edge, run) {
                (true, None) => run = Some(c as usize),
                (false, Some(start)) => {
                    let y = extent.min[1] + r as f64 * rh;
                    walls.push(Wall::horizontal(y, extent.min[0] + start as f64 * cw, extent.min[0] + c as f64 * cw));
                    run = None;
                }
                _ => {}
            }
        }
    }
    // vertical edges between column c-1 and column c
    for c in 0..=cols as isize {
        let mut run: Option<usize> = None;
        for r in 0..=rows as isize {
            let edge = r < rows as isize && is_free(c - 1, r) != is_free(c, r);
            match (edge, run) {
                (true, None) => run = Some(r as usize),
                (false, Some(start)) => {
                    let x = extent.min[0] + c as f64 * cw;
                    walls.push(Wall::vertical(x, extent.min[1] + start as f64 * rh, extent.min[1] + r as f64 * rh));
                    run = None;
                }
                _ => {}
            }
        }
    }
    walls
}

/// True when some point of `targets` cannot be reached in a straight line from
/// `from` without crossing a wall, i.e. reaching it needs a planned detour.
pub fn requires_lookahead(world: &PointMassWorld, from: [f64; 2], targets: &[[f64; 2]]) -> bool {
    targets
        .iter()
        .any(|t| world.walls.iter().any(|w| w.crosses(from, *t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{step, Action};
    use alloc::vec;
    use rand::{Rng, SeedableRng};

    fn pm_state(x: f64, y: f64, vx: f64, vy: f64) -> State {
        State::new(vec![x, y, vx, vy]).unwrap()
    }

    #[test]
    fn rest_with_zero_action_is_a_fixed_point() {
        let w = PointMassWorld::open_box(Extent::unit());
        let s = w.start_state();
        let (next, r) = step(&w, &s, &Action::zeros(2)).unwrap();
        assert_eq!(next, s);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn pushing_into_a_wall_stops_on_it() {
        let mut w = PointMassWorld::open_box(Extent::unit());
        w.walls.push(Wall::vertical(0.6, 0.0, 1.0));
        let w = w.validated().unwrap();
        let s = pm_state(0.6 - 2e-3, 0.5, 1.0, 0.0);
        let (next, _) = step(&w, &s, &Action::new(vec![1.0, 0.0])).unwrap();
        assert!((next[0] - 0.6).abs() <= WALL_MARGIN * 1.0001, "{}", next[0]);
        assert!(next[0] < 0.6);
        assert_eq!(next[2], 0.0);
        // the tangential component is untouched
        let s = pm_state(0.6 - 1e-3, 0.5, 1.0, 0.5);
        let (next, _) = step(&w, &s, &Action::zeros(2)).unwrap();
        assert_eq!(next[2], 0.0);
        assert!((next[3] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn extent_acts_as_a_wall() {
        let w = PointMassWorld::open_box(Extent::unit());
        let s = pm_state(0.999, 0.001, 2.0, -2.0);
        let (next, _) = step(&w, &s, &Action::new(vec![1.0, -1.0])).unwrap();
        assert!((next[0] - (1.0 - WALL_MARGIN)).abs() < 1e-15);
        assert!((next[1] - WALL_MARGIN).abs() < 1e-15);
        assert_eq!((next[2], next[3]), (0.0, 0.0));
    }

    #[test]
    fn free_motion_matches_closed_form() {
        let w = PointMassWorld::open_box(Extent::new(-100.0, -100.0, 100.0, 100.0));
        let (x0, y0, vx0, vy0) = (0.1, -0.2, 0.3, -0.4);
        let (ax, ay) = (0.7, -0.25);
        let mut s = pm_state(x0, y0, vx0, vy0);
        for _ in 0..10 {
            s = step(&w, &s, &Action::new(vec![ax, ay])).unwrap().0;
        }
        // v_k = c^k v0 + b (1 - c^k) / (1 - c),  x_n = x0 + dt * sum_{k=1..n} v_k
        let c = 1.0 - w.damping;
        let b = |a: f64| w.dt * w.force_scale * a / w.mass;
        let closed = |p0: f64, v0: f64, a: f64| {
            let n = 10;
            let vn = c.powi(n) * v0 + b(a) * (1.0 - c.powi(n)) / (1.0 - c);
            let geo = c * (1.0 - c.powi(n)) / (1.0 - c);
            let sum_v = v0 * geo + b(a) / (1.0 - c) * (n as f64 - geo);
            (p0 + w.dt * sum_v, vn)
        };
        let (x, vx) = closed(x0, vx0, ax);
        let (y, vy) = closed(y0, vy0, ay);
        for (got, want) in [(s[0], x), (s[1], y), (s[2], vx), (s[3], vy)] {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_reward_world_emits_exact_zero() {
        let w = PointMassWorld::pinwheel_maze();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut s = w.start_state();
        for _ in 0..500 {
            let a = Action::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let (n, r) = step(&w, &s, &a).unwrap();
            assert_eq!(r, 0.0);
            s = n;
        }
    }

    #[test]
    fn sparse_and_dense_rewards() {
        let w = PointMassWorld::open_box(Extent::unit()).with_reward(RewardSpec::SparseGoal {
            center: [0.5, 0.5],
            radius: 0.1,
            bonus: 2.0,
        });
        let (_, r) = step(&w, &w.start_state(), &Action::zeros(2)).unwrap();
        assert_eq!(r, 2.0);
        let w = w.with_reward(RewardSpec::DenseGoal { center: [0.5, 0.9] });
        let (_, r) = step(&w, &w.start_state(), &Action::zeros(2)).unwrap();
        assert!((r + 0.4).abs() < 1e-12);
    }

    #[test]
    fn pinwheel_has_a_corridor_hidden_from_the_hub() {
        let w = PointMassWorld::pinwheel_maze();
        assert_eq!(pinwheel_cells().len(), 36);
        let ends: Vec<[f64; 2]> = [(7usize, 8usize), (1, 7), (2, 1), (8, 2)]
            .iter()
            .map(|&(c, r)| [0.05 + 0.1 * c as f64, 0.05 + 0.1 * r as f64])
            .collect();
        assert!(requires_lookahead(&w, [0.5, 0.5], &ends));
        // every corridor end is hidden, so none is a one-step straight shot
        for e in &ends {
            assert!(requires_lookahead(&w, [0.5, 0.5], &[*e]));
        }
    }

    #[test]
    fn rejects_diagonal_wall() {
        assert!(Wall::new(0.0, 0.0, 1.0, 1.0).is_err());
    }
}
