//! Clipped-surrogate PPO with separate actor and critic networks.
//!
//! Advantages are Monte-Carlo returns minus the critic's value estimate, the critic
//! minimises the squared one-step TD error, and the actor ascends the clipped surrogate
//! minus an optional pruning penalty supplied through [`PenaltyHook`].

mod buffer;
mod loss;
mod policy;
mod update;

pub use buffer::RolloutBuffer;
pub use loss::{
    actor_loss, actor_objective_and_grad, critic_loss, critic_loss_and_grad, surrogate_term,
};
pub use policy::{Head, LogProbGrad, Policy, PolicyGrads};
pub use update::{ppo_update, NoPenalty, Optimizers, PenaltyHook, UpdateStats};

use crate::error::{Error, Result};
use crate::optim::OptimizerKind;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip_eps: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    /// Update once at least this many transitions are buffered at an episode boundary;
    /// 0 updates after every episode.
    pub rollout_steps: usize,
    pub normalize_advantages: bool,
    pub optimizer: OptimizerKind,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            clip_eps: 0.2,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            update_epochs: 10,
            minibatch_size: 64,
            rollout_steps: 2048,
            normalize_advantages: true,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} not in (0, 1]", self.gamma)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!(
                "clip_eps {} not in (0, 1)",
                self.clip_eps
            )));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        if self.update_epochs == 0 || self.minibatch_size == 0 {
            return Err(Error::Config(
                "update_epochs and minibatch_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}
