//! Torque-limited pendulum. `theta = 0` is upright, `theta = pi` hangs down.

use core::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Bounds, EnvModel, State};

const ACTION_BOUNDS: [Bounds; 1] = [Bounds::symmetric(1.0)];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PendulumReward {
    /// `-(theta^2 + 0.1 theta_dot^2 + 0.001 torque^2)`
    Dense,
    /// `bonus` while within the upright band, zero elsewhere.
    Sparse { bonus: f64 },
}

/// Deserialized worlds fill missing fields from the defaults and must be
/// passed through [`PendulumWorld::validated`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumWorld {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub dt: f64,
    /// Peak torque in N m; actions in `[-1, 1]` scale it.
    pub max_torque: f64,
    /// Angular speed limit in rad/s, which bounds the energy.
    pub max_speed: f64,
    /// Half-width in radians of the band counted as upright.
    pub upright_angle: f64,
    pub reward: PendulumReward,
    pub discount: f64,
    #[serde(skip)]
    ranges: Option<[Bounds; 2]>,
}

impl Default for PendulumWorld {
    fn default() -> Self {
        PendulumWorld {
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            dt: 0.05,
            max_torque: 5.0,
            max_speed: 8.0,
            upright_angle: 0.5,
            reward: PendulumReward::Sparse { bonus: 1.0 },
            discount: 0.99,
            ranges: None,
        }
        .validated()
        .expect("default pendulum is valid")
    }
}

/// Wraps an angle onto `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    theta - two_pi * ((theta - PI) / two_pi).ceil()
}

impl PendulumWorld {
    pub fn validated(mut self) -> Result<Self> {
        let positive = [
            ("mass", self.mass),
            ("length", self.length),
            ("gravity", self.gravity),
            ("dt", self.dt),
            ("max_torque", self.max_torque),
            ("max_speed", self.max_speed),
            ("upright_angle", self.upright_angle),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(alloc::format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("discount must lie in [0, 1)"));
        }
        self.ranges = Some([Bounds::symmetric(PI), Bounds::symmetric(self.max_speed)]);
        Ok(self)
    }

    pub fn with_reward(mut self, reward: PendulumReward) -> Self {
        self.reward = reward;
        self
    }

    pub fn hanging(&self) -> State {
        State::new(alloc::vec![PI, 0.0]).expect("finite")
    }

    pub fn is_upright(&self, s: &[f64]) -> bool {
        wrap_angle(s[0]).abs() < self.upright_angle
    }

    /// Kinetic plus potential energy, zero at rest hanging down.
    pub fn energy(&self, s: &[f64]) -> f64 {
        let inertia = self.mass * self.length * self.length;
        0.5 * inertia * s[1] * s[1] + self.mass * self.gravity * self.length * (1.0 + s[0].cos())
    }
}

impl EnvModel for PendulumWorld {
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
        self.ranges.as_ref().expect("PendulumWorld::validated not called")
    }

    fn transition(&self, s: &[f64], a: &[f64], next: &mut [f64]) -> f64 {
        let torque = a[0] * self.max_torque;
        let inertia = self.mass * self.length * self.length;
        let accel = self.gravity / self.length * s[0].sin() + torque / inertia;
        let omega = (s[1] + self.dt * accel).max(-self.max_speed).min(self.max_speed);
        let theta = wrap_angle(s[0] + self.dt * omega);
        next[0] = theta;
        next[1] = omega;
        match self.reward {
            PendulumReward::Dense => -(theta * theta + 0.1 * omega * omega + 0.001 * torque * torque),
            PendulumReward::Sparse { bonus } => {
                if theta.abs() < self.upright_angle {
                    bonus
                } else {
                    0.0
                }
            }
        }
    }
}
