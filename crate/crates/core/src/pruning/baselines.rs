//! Comparison strategies: group lasso (SSL), first-layer group sparsity (SGS), L1 lasso,
//! random neuron dropout and static magnitude pruning (PoPS).

use rand::Rng;

use super::masks::{mask_lowest, rank_target};
use super::{
    is_prune_event, neuron_importance, sparsity_schedule, survivors, PruneConfig, PruneEvent,
    Strategy,
};
use crate::error::{Error, Result};
use crate::nn::{Grads, MaskedMlp};
use crate::ppo::PenaltyHook;

fn group_lasso_layer(net: &MaskedMlp, l: usize, lambda: f64, grads: &mut Grads) -> f64 {
    let w = net.layers()[l].weights();
    let mut total = 0.0;
    for r in 0..w.rows() {
        let norm = w.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        total += norm;
        if norm > 0.0 {
            for (g, v) in grads.layers[l].row_mut(r).iter_mut().zip(w.row(r)) {
                *g += lambda * v / norm;
            }
        }
    }
    lambda * total
}

/// Regulariser value and (sub)gradient for the penalty-based baselines.
pub fn baseline_penalty(net: &MaskedMlp, strategy: Strategy, lambda: f64) -> Result<(f64, Grads)> {
    let mut grads = Grads::zeros_like(net);
    let hidden = net.num_layers() - 1;
    let penalty = match strategy {
        Strategy::Ssl => (0..hidden)
            .map(|l| group_lasso_layer(net, l, lambda, &mut grads))
            .sum(),
        Strategy::Sgs => {
            if hidden == 0 {
                0.0
            } else {
                group_lasso_layer(net, 0, lambda, &mut grads)
            }
        }
        Strategy::L1Lasso => {
            let mut total = 0.0;
            for (l, layer) in net.layers().iter().enumerate() {
                for (g, &w) in grads.layers[l]
                    .data_mut()
                    .iter_mut()
                    .zip(layer.weights().data())
                {
                    total += w.abs();
                    if w != 0.0 {
                        *g = lambda * w.signum();
                    }
                }
            }
            lambda * total
        }
        other => return Err(Error::Strategy(other.name().to_string())),
    };
    Ok((penalty, grads))
}

/// [`PenaltyHook`] wrapper around [`baseline_penalty`].
#[derive(Debug, Clone, Copy)]
pub struct BaselinePenalty {
    pub strategy: Strategy,
    pub lambda: f64,
}

impl PenaltyHook for BaselinePenalty {
    fn penalty_and_grad(&self, net: &MaskedMlp) -> Result<(f64, Grads)> {
        baseline_penalty(net, self.strategy, self.lambda)
    }
}

/// Per-hidden-neuron ranking score used by a strategy's neuron pruning:
/// importance for DSP, incoming-row L2 norm for SSL/SGS, incoming-row L1 norm for L1 lasso.
pub fn neuron_scores(net: &MaskedMlp, strategy: Strategy) -> Result<Vec<Vec<f64>>> {
    let row_score = |f: fn(&[f64]) -> f64| -> Vec<Vec<f64>> {
        net.hidden_layers()
            .iter()
            .map(|layer| {
                let w = layer.weights();
                (0..w.rows())
                    .map(|r| if layer.mask()[r] { f(w.row(r)) } else { 0.0 })
                    .collect()
            })
            .collect()
    };
    match strategy {
        Strategy::Dsp | Strategy::Dropout => Ok(neuron_importance(net).per_layer),
        Strategy::Ssl | Strategy::Sgs => {
            Ok(row_score(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()))
        }
        Strategy::L1Lasso => Ok(row_score(|r| r.iter().map(|v| v.abs()).sum())),
        other => Err(Error::Strategy(other.name().to_string())),
    }
}

/// Individual weights held at zero after static magnitude pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFreeze {
    pub zeroed: Vec<Vec<bool>>,
}

impl WeightFreeze {
    pub fn apply(&self, net: &mut MaskedMlp) {
        for (l, flags) in self.zeroed.iter().enumerate() {
            let w = net.weights_mut(l).data_mut();
            for (v, &z) in w.iter_mut().zip(flags) {
                if z {
                    *v = 0.0;
                }
            }
        }
    }

    /// Freezes every weight that is currently exactly zero.
    pub fn from_zeros(net: &MaskedMlp) -> Self {
        Self {
            zeroed: net
                .layers()
                .iter()
                .map(|l| l.weights().data().iter().map(|&w| w == 0.0).collect())
                .collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.zeroed.iter().flatten().filter(|&&z| z).count()
    }
}

/// Zeroes the `⌊ratio · W⌋` smallest-magnitude weights across the whole network and
/// returns the zeroed pattern together with the magnitude threshold used.
pub fn pops_prune(net: &mut MaskedMlp, ratio: f64) -> (WeightFreeze, f64) {
    let mut all: Vec<(f64, usize, usize)> = net
        .layers()
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            layer
                .weights()
                .data()
                .iter()
                .enumerate()
                .map(move |(k, w)| (w.abs(), l, k))
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let cut = ((ratio * all.len() as f64).floor() as usize).min(all.len());
    let mut zeroed: Vec<Vec<bool>> = net
        .layers()
        .iter()
        .map(|l| vec![false; l.weights().data().len()])
        .collect();
    for &(_, l, k) in &all[..cut] {
        zeroed[l][k] = true;
    }
    let threshold = if cut > 0 { all[cut - 1].0 } else { 0.0 };
    let freeze = WeightFreeze { zeroed };
    freeze.apply(net);
    (freeze, threshold)
}

/// Applies a baseline's pruning rule at episode `t` toward final ratio `ratio`.
/// Returns `None` when `t` is not a prune episode for the strategy.
pub fn baseline_prune<R: Rng + ?Sized>(
    net: &mut MaskedMlp,
    strategy: Strategy,
    ratio: f64,
    t: usize,
    cfg: &PruneConfig,
    rng: &mut R,
) -> Result<Option<PruneEvent>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!(
            "pruning ratio {ratio} not in [0, 1]"
        )));
    }
    let total_importance = neuron_importance(net).total;
    match strategy {
        Strategy::Pops => {
            if t != cfg.t_start {
                return Ok(None);
            }
            let (_, threshold) = pops_prune(net, ratio);
            Ok(Some(PruneEvent {
                episode: t,
                strategy,
                p_t: ratio,
                psi_t: threshold,
                pruned: 0,
                survivors: survivors(net),
                guarded_layers: Vec::new(),
            }))
        }
        Strategy::Dropout => {
            if !is_prune_event(t, cfg) {
                return Ok(None);
            }
            let hidden: Vec<(usize, usize)> = net
                .hidden_layers()
                .iter()
                .enumerate()
                .flat_map(|(l, layer)| (0..layer.out_dim()).map(move |i| (l, i)))
                .collect();
            for &(l, i) in &hidden {
                net.set_mask(l, i, true)?;
            }
            let count = rank_target(ratio, hidden.len());
            // Random scores turn the ranked cut into a uniform sample of `count` neurons.
            let scores: Vec<Vec<f64>> = net
                .hidden_layers()
                .iter()
                .map(|layer| (0..layer.out_dim()).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let (pruned, guarded_layers) = mask_lowest(net, &scores, count, false)?;
            Ok(Some(PruneEvent {
                episode: t,
                strategy,
                p_t: ratio,
                psi_t: total_importance * ratio,
                pruned,
                survivors: survivors(net),
                guarded_layers,
            }))
        }
        Strategy::Ssl | Strategy::Sgs | Strategy::L1Lasso => {
            if !is_prune_event(t, cfg) {
                return Ok(None);
            }
            let sched = PruneConfig {
                p_final: ratio,
                ..cfg.clone()
            };
            let p_t = sparsity_schedule(t, &sched);
            let scores = neuron_scores(net, strategy)?;
            let target = rank_target(p_t, net.total_hidden());
            let (pruned, guarded_layers) = mask_lowest(net, &scores, target, true)?;
            Ok(Some(PruneEvent {
                episode: t,
                strategy,
                p_t,
                psi_t: total_importance * p_t,
                pruned,
                survivors: survivors(net),
                guarded_layers,
            }))
        }
        other => Err(Error::Strategy(other.name().to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, Activation, MaskedLayer, Mat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_two_one() -> MaskedMlp {
        MaskedMlp::new(vec![
            MaskedLayer::dense(
                Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap(),
                Activation::Relu,
            ),
            MaskedLayer::dense(
                Mat::from_rows(&[vec![1.0, -1.0]]).unwrap(),
                Activation::Identity,
            ),
        ])
        .unwrap()
    }

    fn single(rows: Vec<Vec<f64>>, out: Vec<Vec<f64>>) -> MaskedMlp {
        MaskedMlp::new(vec![
            MaskedLayer::dense(Mat::from_rows(&rows).unwrap(), Activation::Relu),
            MaskedLayer::dense(Mat::from_rows(&out).unwrap(), Activation::Identity),
        ])
        .unwrap()
    }

    #[test]
    fn l1_value() {
        let net = MaskedMlp::new(vec![MaskedLayer::dense(
            Mat::from_rows(&[vec![1.0, -2.0]]).unwrap(),
            Activation::Identity,
        )])
        .unwrap();
        let (p, g) = baseline_penalty(&net, Strategy::L1Lasso, 1.0).unwrap();
        assert_eq!(p, 3.0);
        assert_eq!(g.layers[0].data(), &[1.0, -1.0]);
    }

    #[test]
    fn ssl_single_group() {
        let net = single(vec![vec![3.0, 4.0]], vec![vec![0.0]]);
        let (p, g) = baseline_penalty(&net, Strategy::Ssl, 1.0).unwrap();
        assert_eq!(p, 5.0);
        assert_eq!(g.layers[0].data(), &[0.6, 0.8]);
        assert_eq!(g.layers[1].data(), &[0.0]);
    }

    #[test]
    fn sgs_equals_ssl_with_one_hidden_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = MaskedMlp::random(&[3, 5, 2], Activation::Relu, Activation::Identity, &mut rng)
            .unwrap();
        let a = baseline_penalty(&net, Strategy::Ssl, 0.3).unwrap();
        let b = baseline_penalty(&net, Strategy::Sgs, 0.3).unwrap();
        assert_eq!(a, b);
        let deep = MaskedMlp::random(
            &[3, 5, 4, 2],
            Activation::Relu,
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        let a = baseline_penalty(&deep, Strategy::Ssl, 0.3).unwrap();
        let b = baseline_penalty(&deep, Strategy::Sgs, 0.3).unwrap();
        assert!(a.0 > b.0);
        assert_eq!(b.1.layers[1].max_abs(), 0.0);
    }

    #[test]
    fn zero_group_has_zero_subgradient() {
        let net = single(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![vec![1.0, 1.0]]);
        let (_, g) = baseline_penalty(&net, Strategy::Ssl, 1.0).unwrap();
        assert_eq!(g.layers[0].row(0), &[0.0, 0.0]);
    }

    #[test]
    fn unknown_strategy_errors() {
        assert!(baseline_penalty(&two_two_one(), Strategy::Dropout, 1.0).is_err());
        assert!(baseline_penalty(&two_two_one(), Strategy::Dsp, 1.0).is_err());
    }

    #[test]
    fn penalty_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = MaskedMlp::random(
            &[4, 8, 6, 2],
            Activation::Relu,
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        for s in [Strategy::Ssl, Strategy::Sgs, Strategy::L1Lasso] {
            let (_, g) = baseline_penalty(&net, s, 0.5).unwrap();
            let err =
                grad_check(&net, |n| baseline_penalty(n, s, 0.5).map(|r| r.0), &g, 1e-6).unwrap();
            assert!(err < 1e-6, "{s}: err = {err}");
        }
    }

    #[test]
    fn dropout_masks_exact_count() {
        let cfg = PruneConfig {
            t_start: 0,
            ..PruneConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = single(vec![vec![1.0]; 4], vec![vec![1.0; 4]]);
        for t in [0, 10, 20] {
            let ev = baseline_prune(&mut net, Strategy::Dropout, 0.5, t, &cfg, &mut rng)
                .unwrap()
                .unwrap();
            assert_eq!(net.alive_hidden(), 2);
            assert_eq!(ev.survivors, vec![2]);
        }
        assert!(
            baseline_prune(&mut net, Strategy::Dropout, 0.5, 5, &cfg, &mut rng)
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn pops_zeroes_smallest_magnitudes() {
        let mut net = MaskedMlp::new(vec![MaskedLayer::dense(
            Mat::from_rows(&[vec![0.1, -0.2, 5.0, 6.0]]).unwrap(),
            Activation::Identity,
        )])
        .unwrap();
        let (freeze, threshold) = pops_prune(&mut net, 0.5);
        assert_eq!(net.layers()[0].weights().data(), &[0.0, 0.0, 5.0, 6.0]);
        assert_eq!(freeze.count(), 2);
        assert_eq!(threshold, 0.2);
    }

    #[test]
    fn ssl_rank_on_hand_example() {
        let mut net = two_two_one();
        let cfg = PruneConfig {
            t_start: 0,
            total_prune_steps: 1,
            prune_frequency: 1,
            ..PruneConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scores = neuron_scores(&net, Strategy::Ssl).unwrap();
        assert!((scores[0][0] - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(scores[0][1], 3.0);
        let ev = baseline_prune(&mut net, Strategy::Ssl, 0.5, 1, &cfg, &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(ev.pruned, 1);
        assert_eq!(net.layers()[0].mask(), &[false, true]);
    }
}
