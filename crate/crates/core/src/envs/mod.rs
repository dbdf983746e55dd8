//! Built-in environments: a planar point mass (open box and pinwheel maze), a
//! torque-limited pendulum, and gridworlds with an exact tabular export.

pub mod gridworld;
pub mod occupancy;
pub mod pendulum;
pub mod point_mass;

pub use gridworld::{GridAction, GridWorld};
pub use occupancy::{coverage_fraction, OccupancyGrid, DEFAULT_RESOLUTION};
pub use pendulum::{PendulumReward, PendulumWorld};
pub use point_mass::{PointMassWorld, RewardSpec, Wall};
