//! Multi-path policy optimization.
//!
//! A population of on-policy learners (TRPO or PPO) shares one value
//! function; each iteration only the policy with the best blend of estimated
//! performance and entropy collects samples and is improved. The crate also
//! ships the plain and population baselines, two sparse-reward environments
//! and a seeded experiment harness.
//!
//! Batch reductions run on rayon when the default `parallel` feature is on
//! and sequentially otherwise; both paths give bit-identical results.

pub mod advantage;
pub mod controller;
pub mod env;
pub mod error;
pub mod harness;
pub mod neuralnet;
pub mod optim;
pub mod parallel;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod trpo;

pub use error::{Error, Result};
