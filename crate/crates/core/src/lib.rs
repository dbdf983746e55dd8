//! Plan online, learn offline.
//!
//! Sampling-based model-predictive control (MPPI) whose terminal reward is an
//! optimistic value estimate from a randomized-prior ensemble, the learning loop
//! that refits that ensemble on N-step trajectory-optimization targets, and an
//! exact tabular toolkit (value iteration, H-step Bellman backups, exhaustive
//! MPC) used to check performance bounds.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, experiment
//! drivers and the command line live in the `polo` crate.

#![no_std]
#![forbid(unsafe_code)]
// Whenever std is linked into the build (tests, dev-dependency feature
// unification) its inherent float methods shadow `num_traits::Float`.
#![allow(unused_imports)]

extern crate alloc;

pub mod agent;
pub mod approximator;
pub mod ensemble;
pub mod envs;
pub mod error;
pub mod mdp;
pub mod oracle;
pub mod planner;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{discounted_return, step, Action, Bounds, EnvModel, Extent, State, Trajectory};
