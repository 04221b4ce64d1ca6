//! Risk-aware hierarchical reinforcement learning on probabilistic-goal
//! semi-Markov decision processes.
//!
//! The crate is organised bottom-up:
//!
//! - [`smdp`]: augmented states `z = {x, w}`, the terminal indicator reward,
//!   episode rollout under a two-tiered policy and the success-probability
//!   objective.
//! - [`policy`]: the Gibbs inter-skill policy over Fourier features and the
//!   per-skill Gaussian risk-aware distributions, with analytic
//!   log-gradients and the checkpoint format.
//! - [`learner`]: likelihood-ratio gradient estimators, the TD(0) critic,
//!   the projected two-timescale update, the enumeration oracle and the
//!   training loop.
//! - [`offense`]: a small striker-versus-keeper soccer offense simulator
//!   with Move/Shoot/Dribble skills.
//! - [`er`]: the expected-return comparison agent.
//! - [`harness`]: configuration, manifests and the subcommands behind the
//!   `pgsmdp` binary.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod er;
pub mod error;
pub mod harness;
pub mod learner;
pub mod matrix;
pub mod offense;
pub mod policy;
pub mod rng;
pub mod smdp;

pub use error::{Error, Result};
pub use matrix::Matrix;
