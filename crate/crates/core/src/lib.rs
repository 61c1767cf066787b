//! Decision-point reinforcement learning for safe offline policy improvement.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`] — ground-truth tabular MDPs, the synthetic benchmark builders,
//!   behavior policies and seeded trajectory simulation.
//! * [`estimation`] — visit counts and Monte-Carlo value estimates of the
//!   behavior policy.
//! * [`discrete`] — decision-point identification, the elevated SMDP over
//!   decision points and policy iteration on it.
//! * [`continuous`] — the neighbor-based variant backed by a ball tree.
//! * [`baselines`] — SPIBB, PQI-style filtering and behavior cloning.
//! * [`bounds`] — closed-form safety bounds.
//! * [`harness`] — deferral-aware evaluation, CVaR and seeded experiments.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bounds;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
pub use policy::Verdict;
