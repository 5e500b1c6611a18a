//! Offline Q-learning over per-dimension discretized actions.
//!
//! Treating each action dimension as its own Bellman time step lets a
//! discrete Q-function maximize over one dimension's bins at a time,
//! sidestepping the exponential joint-action space. This crate provides:
//!
//! * exact tabular operators and randomized oracle suites that verify the
//!   per-dimension scheme against full-action value iteration, the
//!   contraction bound, and the conservative fixed point;
//! * a small causal sequence Q-model with sigmoid value heads trained by a
//!   built-in reverse-mode differentiation core;
//! * an offline training harness with Monte-Carlo/n-step targets, a
//!   conservative regularizer, behavior cloning, rollout evaluation, and an
//!   ablation matrix;
//! * dataset generation for a toy grid manipulation task with mixed
//!   demonstration/noisy-replay data.

pub mod action;
pub mod cli;
pub mod config;
pub mod data;
pub mod env;
pub mod episode;
pub mod error;
pub mod model;
pub mod tabular;
pub mod train;

pub use action::{discretize, undiscretize, ActionSpec, ActionToken, DimRange};
pub use config::{ConservatismMode, RunConfig, TrainConfig};
pub use episode::{compute_mc_returns, discounted_returns, Episode, OfflineDataset};
pub use error::{Error, Result};
