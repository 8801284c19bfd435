//! Predictive bisimulation metrics and metric-based intrinsic exploration.
//!
//! The crate is organized bottom-up:
//!
//! - [`mdp`]: finite MDPs, policies, policy evaluation and value iteration.
//! - [`transport`]: exact 1-Wasserstein distances between discrete distributions.
//! - [`bisim`]: classic and predictive bisimulation operators and their fixed points.
//! - [`embedding`]: state embeddings regressed onto a target metric.
//! - [`reward_model`]: Gaussian reward predictor and empirical transition models.
//! - [`intrinsic`]: anchors, the metric-based potential and shaping bonus.
//! - [`envs`]: point-mass mazes, coverage tracking and sparse chains.
//! - [`agent`]: a tabular Q-learning agent trained on shaped rewards.
//! - [`oracle`]: brute-force reference computations used for verification.
//! - [`harness`]: verification suites, maze experiments and file export.

pub mod error;
pub mod mdp;
pub mod transport;
pub mod bisim;
pub mod embedding;
pub mod reward_model;
pub mod intrinsic;
pub mod envs;
pub mod agent;
pub mod oracle;
pub mod harness;

pub use error::{Error, Result};
