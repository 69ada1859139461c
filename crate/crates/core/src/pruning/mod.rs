//! Neuron-importance structured pruning and baseline strategies.
//!
//! The importance of hidden neuron `i` in layer `l` is
//! `Ω = (Σ_j W[l][i,j]²) · (Σ_k W[l+1][k,i]²) · m[l][i]`. Training adds `λ·ΣΩ` to the
//! actor loss; at scheduled episodes the least important neurons are masked and their
//! weights removed, following a cubic sparsity ramp from `p_initial` to `p_final`.

mod baselines;
mod compact;
mod importance;
mod masks;
mod schedule;

pub use baselines::{
    baseline_penalty, baseline_prune, neuron_scores, pops_prune, BaselinePenalty, WeightFreeze,
};
pub use compact::{compact, compact_policy, IndexMap};
pub use importance::{neuron_importance, penalty_and_grad, ImportancePenalty, ImportanceReport};
pub use masks::{mask_lowest, update_masks, PruneEvent};
pub use schedule::{dynamic_threshold, is_prune_event, sparsity_schedule};

use crate::error::{Error, Result};
use crate::nn::MaskedMlp;
use crate::ppo::{NoPenalty, PenaltyHook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Neuron-importance regulariser with the dynamic threshold.
    Dsp,
    /// Group lasso over each hidden neuron's incoming weights.
    Ssl,
    L1Lasso,
    /// Random neuron masks, resampled at every prune event.
    Dropout,
    /// One-shot static magnitude pruning of individual weights.
    Pops,
    /// Group lasso on the first hidden layer only.
    Sgs,
    None,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Dsp,
        Strategy::Ssl,
        Strategy::L1Lasso,
        Strategy::Dropout,
        Strategy::Pops,
        Strategy::Sgs,
        Strategy::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Dsp => "dsp",
            Strategy::Ssl => "ssl",
            Strategy::L1Lasso => "l1_lasso",
            Strategy::Dropout => "dropout",
            Strategy::Pops => "pops",
            Strategy::Sgs => "sgs",
            Strategy::None => "none",
        }
    }

    /// Whether the strategy adds a λ-weighted regulariser.
    pub fn uses_lambda(self) -> bool {
        matches!(
            self,
            Strategy::Dsp | Strategy::Ssl | Strategy::L1Lasso | Strategy::Sgs
        )
    }

    /// Whether the strategy prunes toward a target ratio.
    pub fn uses_ratio(self) -> bool {
        self != Strategy::None
    }

    /// The regulariser applied to the actor during PPO updates.
    pub fn penalty(self, lambda: f64) -> Box<dyn PenaltyHook + Send + Sync> {
        match self {
            Strategy::Dsp => Box::new(ImportancePenalty { lambda }),
            Strategy::Ssl | Strategy::L1Lasso | Strategy::Sgs => Box::new(BaselinePenalty {
                strategy: self,
                lambda,
            }),
            Strategy::Dropout | Strategy::Pops | Strategy::None => Box::new(NoPenalty),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == key || (key == "l1" && *st == Strategy::L1Lasso))
            .ok_or_else(|| Error::Strategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Mask every neuron whose importance falls below `ψ_t = p_t · ΣΩ`.
    Eq16,
    /// Mask the `⌊p_t · H⌋` least important hidden neurons.
    Rank,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eq16" | "threshold" => Ok(ThresholdMode::Eq16),
            "rank" => Ok(ThresholdMode::Rank),
            other => Err(Error::Config(format!("unknown threshold mode `{other}`"))),
        }
    }
}

impl ThresholdMode {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdMode::Eq16 => "eq16",
            ThresholdMode::Rank => "rank",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    pub strategy: Strategy,
    pub lambda: f64,
    pub p_initial: f64,
    pub p_final: f64,
    /// First prune episode.
    pub t_start: usize,
    /// Number of schedule steps after `t_start`.
    pub total_prune_steps: usize,
    /// Episodes between prune events.
    pub prune_frequency: usize,
    pub threshold_mode: ThresholdMode,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Dsp,
            lambda: 1e-4,
            p_initial: 0.0,
            p_final: 0.93,
            t_start: 50,
            total_prune_steps: 40,
            prune_frequency: 10,
            threshold_mode: ThresholdMode::Rank,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda {} must be >= 0",
                self.lambda
            )));
        }
        if !(0.0..1.0).contains(&self.p_initial) {
            return Err(Error::Config(format!(
                "p_initial {} not in [0, 1)",
                self.p_initial
            )));
        }
        if !(self.p_final > 0.0 && self.p_final <= 1.0) {
            return Err(Error::Config(format!(
                "p_final {} not in (0, 1]",
                self.p_final
            )));
        }
        if self.p_initial >= self.p_final {
            return Err(Error::Config("p_initial must be < p_final".into()));
        }
        if self.total_prune_steps == 0 || self.prune_frequency == 0 {
            return Err(Error::Config(
                "total_prune_steps and prune_frequency must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Last episode at which the schedule changes.
    pub fn schedule_end(&self) -> usize {
        self.t_start + self.total_prune_steps * self.prune_frequency
    }
}

/// Hidden-neuron survivor count per hidden layer.
pub fn survivors(net: &MaskedMlp) -> Vec<usize> {
    net.hidden_layers().iter().map(|l| l.alive()).collect()
}
