use crate::envs::Action;
use crate::error::{Error, Result};

/// Transitions from one or more complete episodes, in collection order.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    /// Next state is terminal (its value is taken as zero).
    pub terminals: Vec<bool>,
    /// Last transition of an episode, terminal or truncated.
    pub episode_ends: Vec<bool>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        state: Vec<f64>,
        action: Action,
        log_prob: f64,
        reward: f64,
        value: f64,
        next_state: Vec<f64>,
        terminal: bool,
        episode_end: bool,
    ) {
        self.states.push(state);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.next_states.push(next_state);
        self.terminals.push(terminal);
        self.episode_ends.push(episode_end);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Discounted reward-to-go within each episode and `advantage = return - value`.
    /// The end of the buffer is treated as an episode boundary.
    pub fn compute_returns_and_advantages(&mut self, gamma: f64) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let n = self.len();
        if self.rewards.len() != n || self.values.len() != n || self.episode_ends.len() != n {
            return Err(Error::shape(
                "rollout buffer columns",
                n,
                self.rewards.len(),
            ));
        }
        self.returns = vec![0.0; n];
        let mut running = 0.0;
        for t in (0..n).rev() {
            if self.episode_ends[t] {
                running = 0.0;
            }
            running = self.rewards[t] + gamma * running;
            self.returns[t] = running;
        }
        self.advantages = self
            .returns
            .iter()
            .zip(&self.values)
            .map(|(g, v)| g - v)
            .collect();
        Ok(())
    }

    /// Shifts and scales advantages to zero mean and unit variance.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n == 0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self
            .advantages
            .iter()
            .map(|a| (a - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt().max(1e-8);
        for a in &mut self.advantages {
            *a = (*a - mean) / std;
        }
    }

    pub fn finalize(&mut self, gamma: f64, normalize: bool) -> Result<()> {
        self.compute_returns_and_advantages(gamma)?;
        if normalize {
            self.normalize_advantages();
        }
        Ok(())
    }

    pub fn is_finalized(&self) -> bool {
        !self.is_empty() && self.returns.len() == self.len() && self.advantages.len() == self.len()
    }
}
