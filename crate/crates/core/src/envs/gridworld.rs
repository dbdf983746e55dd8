//! Deterministic gridworld with a continuous-action embedding and an exact
//! tabular export.
//!
//! States are cell coordinates `(column, row)` stored as reals. The action is a
//! single real in `[0, 4]`, rounded to the nearest [`GridAction`] index. Moves
//! into obstacles or off the grid leave the agent in place. Acting from cell
//! `c` earns `rewards[c]`; absorbing cells self-loop under every action.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Bounds, EnvModel, State};
use crate::oracle::TabularMDP;

const ACTION_BOUNDS: [Bounds; 1] = [Bounds::new(0.0, 4.0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
        GridAction::Stay,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The continuous action that decodes to this move.
    pub fn embedding(self) -> f64 {
        self.index() as f64
    }

    pub fn decode(a: f64) -> GridAction {
        let i = a.round().max(0.0).min(4.0) as usize;
        Self::ALL[i]
    }

    fn delta(self) -> (isize, isize) {
        match self {
            GridAction::Up => (0, 1),
            GridAction::Down => (0, -1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
            GridAction::Stay => (0, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` marks an obstacle.
    pub obstacles: Vec<bool>,
    /// Row-major per-cell reward for acting from that cell.
    pub rewards: Vec<f64>,
    /// Row-major, `true` marks a cell that self-loops under every action.
    pub absorbing: Vec<bool>,
    pub discount: f64,
    #[serde(skip)]
    cache: Option<Cache>,
}

#[derive(Clone, Debug, PartialEq)]
struct Cache {
    ranges: [Bounds; 2],
    /// cell -> tabular index (None for obstacles)
    index_of_cell: Vec<Option<usize>>,
    cell_of_index: Vec<usize>,
}

impl GridWorld {
    /// Open grid with reward -1 everywhere except an absorbing zero-reward goal.
    pub fn with_goal(width: usize, height: usize, goal: (usize, usize), discount: f64) -> Result<Self> {
        let n = width * height;
        let mut rewards = vec![-1.0; n];
        let mut absorbing = vec![false; n];
        let g = goal.1 * width + goal.0;
        if goal.0 >= width || goal.1 >= height {
            return Err(Error::config("goal outside the grid"));
        }
        rewards[g] = 0.0;
        absorbing[g] = true;
        GridWorld {
            width,
            height,
            obstacles: vec![false; n],
            rewards,
            absorbing,
            discount,
            cache: None,
        }
        .validated()
    }

    pub fn validated(mut self) -> Result<Self> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("grid must have at least one cell"));
        }
        let n = self.width * self.height;
        for (name, len) in [
            ("obstacles", self.obstacles.len()),
            ("rewards", self.rewards.len()),
            ("absorbing", self.absorbing.len()),
        ] {
            if len != n {
                return Err(Error::config(alloc::format!("{name} must have width*height = {n} entries")));
            }
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("discount must lie in [0, 1)"));
        }
        let mut index_of_cell = vec![None; n];
        let mut cell_of_index = Vec::new();
        for c in 0..n {
            if !self.obstacles[c] {
                index_of_cell[c] = Some(cell_of_index.len());
                cell_of_index.push(c);
            }
        }
        if cell_of_index.is_empty() {
            return Err(Error::config("grid has no free cell"));
        }
        self.cache = Some(Cache {
            ranges: [
                Bounds::new(0.0, (self.width - 1) as f64),
                Bounds::new(0.0, (self.height - 1) as f64),
            ],
            index_of_cell,
            cell_of_index,
        });
        Ok(self)
    }

    fn cache(&self) -> &Cache {
        self.cache.as_ref().expect("GridWorld::validated not called")
    }

    pub fn num_states(&self) -> usize {
        self.cache().cell_of_index.len()
    }

    fn cell_at(&self, s: &[f64]) -> usize {
        let c = (s[0].round().max(0.0) as usize).min(self.width - 1);
        let r = (s[1].round().max(0.0) as usize).min(self.height - 1);
        r * self.width + c
    }

    /// Tabular index of a state, `None` for obstacle cells.
    pub fn index_of(&self, s: &[f64]) -> Option<usize> {
        self.cache().index_of_cell[self.cell_at(s)]
    }

    pub fn state_of(&self, index: usize) -> State {
        let cell = self.cache().cell_of_index[index];
        State::new(vec![(cell % self.width) as f64, (cell / self.width) as f64]).expect("finite")
    }

    fn move_from(&self, cell: usize, action: GridAction) -> usize {
        if self.absorbing[cell] {
            return cell;
        }
        let (dc, dr) = action.delta();
        let c = (cell % self.width) as isize + dc;
        let r = (cell / self.width) as isize + dr;
        if c < 0 || r < 0 || c >= self.width as isize || r >= self.height as isize {
            return cell;
        }
        let target = r as usize * self.width + c as usize;
        if self.obstacles[target] {
            cell
        } else {
            target
        }
    }

    /// Exact tabular form over non-obstacle cells, numbered row-major.
    pub fn to_tabular(&self) -> TabularMDP {
        let cache = self.cache();
        let n = cache.cell_of_index.len();
        let a = GridAction::ALL.len();
        let mut next = Vec::with_capacity(n * a);
        let mut reward = Vec::with_capacity(n * a);
        for &cell in &cache.cell_of_index {
            for act in GridAction::ALL {
                let to = self.move_from(cell, act);
                next.push(cache.index_of_cell[to].expect("moves never enter obstacles"));
                reward.push(self.rewards[cell]);
            }
        }
        TabularMDP::new(n, a, next, reward, self.discount).expect("gridworld export is well formed")
    }

    /// The continuous action vectors, one per [`GridAction`], for use as a
    /// discrete perturbation set.
    pub fn action_embeddings() -> Vec<Vec<f64>> {
        GridAction::ALL.iter().map(|a| vec![a.embedding()]).collect()
    }
}

impl EnvModel for GridWorld {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_bounds(&self) -> &[Bounds] {
        &ACTION_BOUNDS
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn state_ranges(&self) -> &[Bounds] {
        &self.cache().ranges
    }

    fn transition(&self, s: &[f64], a: &[f64], next: &mut [f64]) -> f64 {
        let cell = self.cell_at(s);
        let to = self.move_from(cell, GridAction::decode(a[0]));
        next[0] = (to % self.width) as f64;
        next[1] = (to / self.width) as f64;
        self.rewards[cell]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{step, Action};
    use rand::{Rng, SeedableRng};

    #[test]
    fn right_from_state_three() {
        let g = GridWorld::with_goal(5, 5, (4, 4), 0.9).unwrap();
        let m = g.to_tabular();
        assert_eq!(m.next_state(3, GridAction::Right.index()), 4);
        assert_eq!(m.reward(3, GridAction::Right.index()), -1.0);
        let (next, r) = step(&g, &g.state_of(3), &Action::new(vec![GridAction::Right.embedding()])).unwrap();
        assert_eq!(g.index_of(&next), Some(4));
        assert_eq!(r, -1.0);
    }

    #[test]
    fn single_cell_grid_self_loops() {
        let g = GridWorld::with_goal(1, 1, (0, 0), 0.5).unwrap();
        let m = g.to_tabular();
        assert_eq!(m.num_states(), 1);
        for a in 0..m.num_actions() {
            assert_eq!(m.next_state(0, a), 0);
        }
    }

    #[test]
    fn two_by_two_right_moves_to_neighbor() {
        let g = GridWorld::with_goal(2, 2, (1, 1), 0.9).unwrap();
        let m = g.to_tabular();
        assert_eq!(m.next_state(0, GridAction::Right.index()), 1);
        assert_eq!(g.state_of(1).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn obstacles_become_self_loops_and_are_not_states() {
        let mut g = GridWorld::with_goal(3, 1, (2, 0), 0.9).unwrap();
        g.obstacles[1] = true;
        let g = g.validated().unwrap();
        let m = g.to_tabular();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.next_state(0, GridAction::Right.index()), 0);
    }

    #[test]
    fn random_grid_agrees_with_its_tabular_export_everywhere() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut g = GridWorld::with_goal(8, 8, (7, 7), 0.95).unwrap();
        for c in 0..64 {
            if c != 63 && rng.random::<f64>() < 0.2 {
                g.obstacles[c] = true;
            }
            g.rewards[c] = rng.random_range(-2.0..1.0);
        }
        let g = g.validated().unwrap();
        let m = g.to_tabular();
        for s in 0..m.num_states() {
            for a in GridAction::ALL {
                let (next, r) = step(&g, &g.state_of(s), &Action::new(vec![a.embedding()])).unwrap();
                assert_eq!(g.index_of(&next), Some(m.next_state(s, a.index())));
                assert_eq!(r, m.reward(s, a.index()));
            }
        }
    }

    #[test]
    fn decode_rounds_to_nearest() {
        assert_eq!(GridAction::decode(0.49), GridAction::Up);
        assert_eq!(GridAction::decode(2.6), GridAction::Right);
        assert_eq!(GridAction::decode(9.0), GridAction::Stay);
        assert_eq!(GridAction::decode(-3.0), GridAction::Up);
    }
}
