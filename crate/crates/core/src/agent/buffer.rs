use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::State;

/// Bounded FIFO store of visited states.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    states: VecDeque<State>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("buffer capacity must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            states: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Appends `s`, evicting the oldest state when full.
    pub fn add(&mut self, s: State) {
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(s);
    }

    pub fn get(&self, i: usize) -> Option<&State> {
        self.states.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &State> {
        self.states.iter()
    }

    /// `n` positions drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.states.is_empty() {
            return Err(Error::Empty("replay buffer"));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.states.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&State>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| &self.states[i])
            .collect())
    }
}
