//! Online learning in communicating MDPs with global concave rewards.
//!
//! The crate provides an optimistic learning agent (Toc-UCRL2) that couples a
//! UCRL2-style exploration scheme with online convex optimization oracles, the
//! offline benchmark used to measure its regret, and the orchestration needed to
//! run seeded experiment campaigns.
//!
//! Module layout:
//!
//! * [`mdp`]: instances, simulation, diameter and stationary distributions
//! * [`rewards`]: concave reward families with gradients and Fenchel duals
//! * [`oco`]: Frank-Wolfe, tuned gradient descent and tuned mirror descent
//! * [`ucrl`]: visit counts, confidence regions and extended value iteration
//! * [`agent`]: the learning loop, the anytime wrapper and the knapsack agent
//! * [`benchmark`]: offline optimum, linear oracle and dual certificates
//! * [`harness`]: campaigns, aggregation and CSV output

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod benchmark;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod oco;
pub mod rewards;
pub mod ucrl;

pub use error::{Error, Result};
