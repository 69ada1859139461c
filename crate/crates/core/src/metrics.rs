//! Evaluation quantities: episode return and model size / cost counts.

use crate::nn::MaskedMlp;

/// One per-episode log record.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub ret: f64,
    pub neurons: usize,
    pub weights: usize,
    pub flops: f64,
    pub p_t: f64,
    pub psi_t: f64,
    pub wall_time_ms: f64,
}

pub fn episode_return(rewards: &[f64]) -> f64 {
    rewards.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCounts {
    /// Non-zero weights, `Σ (1 - S) · I · O`.
    pub weights: usize,
    /// Alive hidden neurons.
    pub neurons: usize,
    /// `Σ (1 - S) · (2I - 1) · O`.
    pub flops: f64,
    /// Forward multiplications over the surviving widths.
    pub mults: usize,
}

impl ModelCounts {
    pub fn combined(self, other: ModelCounts) -> ModelCounts {
        ModelCounts {
            weights: self.weights + other.weights,
            neurons: self.neurons + other.neurons,
            flops: self.flops + other.flops,
            mults: self.mults + other.mults,
        }
    }
}

/// Per-layer sparsity `S` is the fraction of weights that are exactly zero.
pub fn model_counts(net: &MaskedMlp) -> ModelCounts {
    let mut weights = 0;
    let mut flops = 0.0;
    for layer in net.layers() {
        let (o, i) = layer.weights().shape();
        let nonzero = layer.weights().data().iter().filter(|&&w| w != 0.0).count();
        weights += nonzero;
        let density = nonzero as f64 / (i * o) as f64;
        flops += density * (2 * i - 1) as f64 * o as f64;
    }
    let neurons = net.alive_hidden();
    let mut widths = vec![net.input_dim()];
    widths.extend(net.hidden_layers().iter().map(|l| l.alive()));
    widths.push(net.output_dim());
    let mults = widths.windows(2).map(|w| w[0] * w[1]).sum();
    ModelCounts {
        weights,
        neurons,
        flops,
        mults,
    }
}

/// Counts for the actor, optionally including the critic.
pub fn model_counts_with(actor: &MaskedMlp, critic: Option<&MaskedMlp>) -> ModelCounts {
    let a = model_counts(actor);
    match critic {
        Some(c) => a.combined(model_counts(c)),
        None => a,
    }
}
