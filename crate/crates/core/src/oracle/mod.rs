//! Exact dynamic programming on small deterministic MDPs.
//!
//! These routines are the reference against which the sampling-based planner
//! and the learned values are checked: value iteration, the H-step Bellman
//! backup (by repeated application and by exhaustive search), exhaustive
//! H-step MPC, policy evaluation, and randomized checks of the greedy and MPC
//! suboptimality bounds.

mod bounds;
mod tabular;

pub use bounds::{
    bound_check, contraction_check, greedy_bound_check, greedy_tight_instance, mpc_gap_bound, BoundCheckConfig,
    BoundReport, ContractionReport, Violation,
};
pub use tabular::{
    bellman, bellman_h, bellman_h_search, greedy_policy, mpc_policy_tabular, performance, policy_eval,
    sup_norm_distance, value_iteration, TabularMDP, TabularPolicy, TabularValue, DEFAULT_SEARCH_BUDGET,
};
