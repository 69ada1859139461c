//! Structured pruning of PPO actor networks.
//!
//! A bias-free masked MLP ([`nn`]), Gym-compatible environments ([`envs`]), a clipped
//! PPO learner ([`ppo`]), neuron-importance pruning and baselines ([`pruning`]), size and
//! cost counts ([`metrics`]) and the experiment driver ([`harness`]).

pub mod envs;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod ppo;
pub mod pruning;

pub use error::{Error, Result};
