//! Gradient-descent optimizers over masked networks.
//!
//! Plain SGD is the default. The Adam variant keeps per-weight moment estimates and
//! skips (and resets) every weight attached to a masked-off neuron, so a pruned neuron
//! cannot be moved by stale momentum.

use crate::error::{Error, Result};
use crate::nn::{Grads, MaskedMlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn ensure(&mut self, len: usize) {
        if self.m.len() != len {
            self.m = vec![0.0; len];
            self.v = vec![0.0; len];
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    t: u64,
    layers: Vec<Moments>,
    extra: Moments,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }
        Ok(Self {
            kind,
            lr,
            t: 0,
            layers: Vec::new(),
            extra: Moments::default(),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Descends `net` along `grads`, and optionally a free parameter vector `extra`
    /// (e.g. a Gaussian head's log-std) along `extra_grad`.
    pub fn step(
        &mut self,
        net: &mut MaskedMlp,
        grads: &Grads,
        extra: Option<(&mut [f64], &[f64])>,
    ) -> Result<()> {
        grads.check_shapes(net)?;
        match self.kind {
            OptimizerKind::Sgd => {
                net.sgd_step(grads, self.lr)?;
                if let Some((params, g)) = extra {
                    for (p, gi) in params.iter_mut().zip(g) {
                        *p -= self.lr * gi;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - BETA1.powi(self.t as i32);
                let bc2 = 1.0 - BETA2.powi(self.t as i32);
                let step = self.lr * bc2.sqrt() / bc1;
                if self.layers.len() != net.num_layers() {
                    self.layers = vec![Moments::default(); net.num_layers()];
                }
                let frozen = frozen_entries(net);
                for l in 0..net.num_layers() {
                    let g = grads.layers[l].data();
                    let mom = &mut self.layers[l];
                    mom.ensure(g.len());
                    let w = net.weights_mut(l).data_mut();
                    for k in 0..g.len() {
                        if frozen[l][k] {
                            mom.m[k] = 0.0;
                            mom.v[k] = 0.0;
                            continue;
                        }
                        adam_update(&mut w[k], g[k], &mut mom.m[k], &mut mom.v[k], step);
                    }
                }
                if let Some((params, g)) = extra {
                    self.extra.ensure(params.len());
                    for k in 0..params.len() {
                        adam_update(
                            &mut params[k],
                            g[k],
                            &mut self.extra.m[k],
                            &mut self.extra.v[k],
                            step,
                        );
                    }
                }
                if !net.is_finite() {
                    return Err(Error::NonFinite("weights after adam step".into()));
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn adam_update(w: &mut f64, g: f64, m: &mut f64, v: &mut f64, step: f64) {
    *m = BETA1 * *m + (1.0 - BETA1) * g;
    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
    *w -= step * *m / (v.sqrt() + ADAM_EPS);
}

/// For each layer, flags the weights that connect to a masked-off neuron.
fn frozen_entries(net: &MaskedMlp) -> Vec<Vec<bool>> {
    let layers = net.layers();
    layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let cols = layer.in_dim();
            let prev_mask = if l > 0 {
                Some(layers[l - 1].mask())
            } else {
                None
            };
            let mut out = vec![false; layer.out_dim() * cols];
            for (r, &alive) in layer.mask().iter().enumerate() {
                for c in 0..cols {
                    let col_dead = prev_mask.is_some_and(|m| !m[c]);
                    out[r * cols + c] = !alive || col_dead;
                }
            }
            out
        })
        .collect()
}
