use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    actor_objective_and_grad, critic_loss_and_grad, Head, Policy, PpoConfig, RolloutBuffer,
};
use crate::error::{Error, Result};
use crate::nn::{Grads, MaskedMlp};
use crate::optim::Optimizer;

/// Regulariser added to the actor's loss: returns the penalty value and its weight gradient.
pub trait PenaltyHook {
    fn penalty_and_grad(&self, net: &MaskedMlp) -> Result<(f64, Grads)>;
}

/// The zero penalty.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPenalty;

impl PenaltyHook for NoPenalty {
    fn penalty_and_grad(&self, net: &MaskedMlp) -> Result<(f64, Grads)> {
        Ok((0.0, Grads::zeros_like(net)))
    }
}

#[derive(Debug, Clone)]
pub struct Optimizers {
    pub actor: Optimizer,
    pub critic: Optimizer,
}

impl Optimizers {
    pub fn from_config(cfg: &PpoConfig) -> Result<Self> {
        Ok(Self {
            actor: Optimizer::new(cfg.optimizer, cfg.actor_lr)?,
            critic: Optimizer::new(cfg.optimizer, cfg.critic_lr)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    /// Mean surrogate of the last minibatch.
    pub actor_objective: f64,
    /// Mean squared TD error of the last minibatch.
    pub critic_loss: f64,
    pub penalty_before: f64,
    pub penalty_after: f64,
    pub minibatches: usize,
}

/// Runs `update_epochs` passes of shuffled minibatch updates over a finalized buffer.
///
/// The actor descends `-surrogate + penalty`; the critic descends the squared TD error.
/// Gradients touching masked-off actor neurons are zeroed before every step.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    critic: &mut MaskedMlp,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    penalty: &dyn PenaltyHook,
    opt: &mut Optimizers,
    rng: &mut R,
) -> Result<UpdateStats> {
    if !buf.is_finalized() {
        return Err(Error::EmptyBuffer);
    }
    let penalty_before = penalty.penalty_and_grad(&policy.actor)?.0;
    let mut indices: Vec<usize> = (0..buf.len()).collect();
    let mut stats = UpdateStats {
        actor_objective: 0.0,
        critic_loss: 0.0,
        penalty_before,
        penalty_after: penalty_before,
        minibatches: 0,
    };
    for epoch in 0..cfg.update_epochs {
        indices.shuffle(rng);
        for batch in indices.chunks(cfg.minibatch_size) {
            let (objective, mut grads) =
                actor_objective_and_grad(buf, policy, batch, cfg.clip_eps)?;
            let (pen, pen_grad) = penalty.penalty_and_grad(&policy.actor)?;
            grads.net.add_scaled(1.0, &pen_grad);
            grads.net.zero_masked(&policy.actor);
            if !objective.is_finite() || !pen.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "actor update (epoch {epoch}, minibatch {}): objective {objective}, \
                     penalty {pen}, max |grad| {}",
                    stats.minibatches,
                    grads.net.max_abs()
                )));
            }
            let log_std_grad = grads.log_std;
            let extra = match &mut policy.head {
                Head::Gaussian { log_std } => {
                    Some((log_std.as_mut_slice(), log_std_grad.as_slice()))
                }
                Head::Categorical => None,
            };
            opt.actor.step(&mut policy.actor, &grads.net, extra)?;

            let (closs, cgrads) = critic_loss_and_grad(buf, critic, cfg.gamma, batch)?;
            if !closs.is_finite() || !cgrads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "critic update (epoch {epoch}, minibatch {}): loss {closs}",
                    stats.minibatches
                )));
            }
            opt.critic.step(critic, &cgrads, None)?;

            stats.actor_objective = objective;
            stats.critic_loss = closs;
            stats.minibatches += 1;
        }
    }
    stats.penalty_after = penalty.penalty_and_grad(&policy.actor)?.0;
    Ok(stats)
}
