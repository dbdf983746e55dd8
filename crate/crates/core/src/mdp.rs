//! States, actions, the environment-model interface and discounted returns.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn symmetric(half_width: f64) -> Self {
        Self::new(-half_width, half_width)
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Affine map of `[lo, hi]` onto `[-1, 1]`.
    #[inline]
    pub fn normalize(&self, x: f64) -> f64 {
        let w = self.width();
        if w > 0.0 {
            2.0 * (x - self.lo) / w - 1.0
        } else {
            0.0
        }
    }
}

/// Axis-aligned planar rectangle, used for workspaces and occupancy grids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Extent {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Extent {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            min: [x_min, y_min],
            max: [x_max, y_max],
        }
    }

    pub const fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

impl From<[f64; 4]> for Extent {
    fn from(v: [f64; 4]) -> Self {
        Extent::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Extent> for [f64; 4] {
    fn from(e: Extent) -> Self {
        [e.min[0], e.min[1], e.max[0], e.max[1]]
    }
}

fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

/// A point in the state space. All entries are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct State(Vec<f64>);

impl State {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match first_non_finite(&values) {
            Some(index) => Err(Error::ModelFault {
                what: "state",
                index,
            }),
            None => Ok(State(values)),
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for State {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for State {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        State::new(v)
    }
}

impl From<State> for Vec<f64> {
    fn from(s: State) -> Self {
        s.0
    }
}

/// A control input. Entries may lie outside the model's bounds; [`step`]
/// clamps them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(Vec<f64>);

impl Action {
    pub fn new(values: Vec<f64>) -> Self {
        Action(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Action(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn clamped(&self, bounds: &[Bounds]) -> Action {
        Action(
            self.0
                .iter()
                .zip(bounds)
                .map(|(a, b)| b.clamp(*a))
                .collect(),
        )
    }
}

impl Deref for Action {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Deterministic dynamics and reward. The model keeps no state between calls;
/// the current state is always passed in, so any visited state can be replayed.
pub trait EnvModel {
    fn state_dim(&self) -> usize;

    fn action_bounds(&self) -> &[Bounds];

    fn action_dim(&self) -> usize {
        self.action_bounds().len()
    }

    fn discount(&self) -> f64;

    /// Declared per-dimension state ranges, used to scale value-network inputs.
    fn state_ranges(&self) -> &[Bounds];

    /// Writes the successor of `state` under `action` into `next` and returns
    /// the reward. Callers guarantee dimensions and that `action` is in bounds.
    fn transition(&self, state: &[f64], action: &[f64], next: &mut [f64]) -> f64;

    /// Planar position of a state, for environments with a 2D workspace.
    fn position(&self, _state: &[f64]) -> Option<[f64; 2]> {
        None
    }

    fn workspace(&self) -> Option<Extent> {
        None
    }
}

impl<M: EnvModel + ?Sized> EnvModel for &M {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn action_bounds(&self) -> &[Bounds] {
        (**self).action_bounds()
    }
    fn discount(&self) -> f64 {
        (**self).discount()
    }
    fn state_ranges(&self) -> &[Bounds] {
        (**self).state_ranges()
    }
    fn transition(&self, state: &[f64], action: &[f64], next: &mut [f64]) -> f64 {
        (**self).transition(state, action, next)
    }
    fn position(&self, state: &[f64]) -> Option<[f64; 2]> {
        (**self).position(state)
    }
    fn workspace(&self) -> Option<Extent> {
        (**self).workspace()
    }
}

/// Wraps a model and reports zero reward everywhere; dynamics are unchanged.
#[derive(Clone, Copy, Debug)]
pub struct ZeroReward<M>(pub M);

impl<M: EnvModel> EnvModel for ZeroReward<M> {
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }
    fn action_bounds(&self) -> &[Bounds] {
        self.0.action_bounds()
    }
    fn discount(&self) -> f64 {
        self.0.discount()
    }
    fn state_ranges(&self) -> &[Bounds] {
        self.0.state_ranges()
    }
    fn transition(&self, state: &[f64], action: &[f64], next: &mut [f64]) -> f64 {
        self.0.transition(state, action, next);
        0.0
    }
    fn position(&self, state: &[f64]) -> Option<[f64; 2]> {
        self.0.position(state)
    }
    fn workspace(&self) -> Option<Extent> {
        self.0.workspace()
    }
}

pub(crate) fn clamp_into(bounds: &[Bounds], action: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(action).zip(bounds) {
        *o = b.clamp(*a);
    }
}

/// Non-allocating step on raw slices. `action` must already be clamped.
pub(crate) fn step_into<M: EnvModel + ?Sized>(
    model: &M,
    state: &[f64],
    action: &[f64],
    next: &mut [f64],
) -> Result<f64> {
    let reward = model.transition(state, action, next);
    if let Some(index) = first_non_finite(next) {
        return Err(Error::ModelFault {
            what: "next state",
            index,
        });
    }
    if !reward.is_finite() {
        return Err(Error::ModelFault {
            what: "reward",
            index: 0,
        });
    }
    Ok(reward)
}

/// Advances `model` by one step. Out-of-bounds actions are clamped.
pub fn step<M: EnvModel + ?Sized>(model: &M, s: &State, a: &Action) -> Result<(State, f64)> {
    check_dim("state", model.state_dim(), s.len())?;
    check_dim("action", model.action_dim(), a.len())?;
    let mut clamped = vec![0.0; a.len()];
    clamp_into(model.action_bounds(), a, &mut clamped);
    let mut next = vec![0.0; s.len()];
    let reward = step_into(model, s, &clamped, &mut next)?;
    Ok((State(next), reward))
}

/// `sum_t gamma^t r_t + gamma^H * terminal_value` with `H = rewards.len()`.
pub fn discounted_return(rewards: &[f64], gamma: f64, terminal_value: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config("discount must lie in [0, 1)"));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("reward"));
    }
    if !terminal_value.is_finite() {
        return Err(Error::NonFinite("terminal value"));
    }
    let mut total = 0.0;
    let mut discount = 1.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    Ok(total + discount * terminal_value)
}

/// An open-loop rollout: `states.len() == actions.len() + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    /// Simulates `actions` from `start`. Stored actions are the clamped ones
    /// actually applied.
    pub fn rollout<M: EnvModel + ?Sized>(model: &M, start: &State, actions: &[Action]) -> Result<Self> {
        let mut states = Vec::with_capacity(actions.len() + 1);
        let mut applied = Vec::with_capacity(actions.len());
        let mut rewards = Vec::with_capacity(actions.len());
        states.push(start.clone());
        for a in actions {
            let a = a.clamped(model.action_bounds());
            let (next, r) = step(model, states.last().expect("non-empty"), &a)?;
            states.push(next);
            applied.push(a);
            rewards.push(r);
        }
        Ok(Trajectory {
            states,
            actions: applied,
            rewards,
        })
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn discounted_return(&self, gamma: f64, terminal_value: f64) -> Result<f64> {
        discounted_return(&self.rewards, gamma, terminal_value)
    }
}
