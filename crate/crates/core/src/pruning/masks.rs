use log::warn;

use super::{sparsity_schedule, survivors, ImportanceReport, PruneConfig, Strategy, ThresholdMode};
use crate::error::{Error, Result};
use crate::nn::MaskedMlp;

/// One row of the prune log.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneEvent {
    pub episode: usize,
    pub strategy: Strategy,
    pub p_t: f64,
    pub psi_t: f64,
    /// Neurons newly masked by this event.
    pub pruned: usize,
    /// Alive neurons per hidden layer after the event.
    pub survivors: Vec<usize>,
    /// Hidden layers where the never-empty guard kept a neuron alive.
    pub guarded_layers: Vec<usize>,
}

/// Masks the selected alive neurons, except that a layer is never emptied: if every
/// neuron of a layer would end up masked, its highest-scoring candidate is kept.
fn apply_selection(
    net: &mut MaskedMlp,
    scores: &[Vec<f64>],
    mut chosen: Vec<(usize, usize)>,
    zero_weights: bool,
) -> Result<(usize, Vec<usize>)> {
    let mut guarded = Vec::new();
    for (l, layer) in net.hidden_layers().iter().enumerate() {
        let alive = layer.alive();
        let in_layer: Vec<usize> = chosen
            .iter()
            .filter(|(cl, _)| *cl == l)
            .map(|&(_, i)| i)
            .collect();
        if alive > 0 && in_layer.len() >= alive {
            let keep = *in_layer
                .iter()
                .max_by(|&&a, &&b| scores[l][a].total_cmp(&scores[l][b]).then(b.cmp(&a)))
                .expect("non-empty");
            warn!("pruning would empty hidden layer {l}; keeping neuron {keep}");
            chosen.retain(|&(cl, i)| !(cl == l && i == keep));
            guarded.push(l);
        }
    }
    for &(l, i) in &chosen {
        net.set_mask(l, i, false)?;
        if zero_weights {
            net.zero_neuron_weights(l, i);
        }
    }
    Ok((chosen.len(), guarded))
}

fn check_scores(net: &MaskedMlp, scores: &[Vec<f64>]) -> Result<()> {
    let hidden = net.hidden_layers();
    if scores.len() != hidden.len()
        || scores
            .iter()
            .zip(hidden)
            .any(|(s, l)| s.len() != l.out_dim())
    {
        return Err(Error::shape(
            "neuron scores",
            format!(
                "{:?}",
                hidden.iter().map(|l| l.out_dim()).collect::<Vec<_>>()
            ),
            format!("{:?}", scores.iter().map(Vec::len).collect::<Vec<_>>()),
        ));
    }
    Ok(())
}

/// Rank mode: masks the lowest-scoring alive neurons until `target_masked` hidden neurons
/// in total are masked. Already-masked neurons count toward the target and are never
/// revived. Ties break toward earlier layers and lower indices.
pub fn mask_lowest(
    net: &mut MaskedMlp,
    scores: &[Vec<f64>],
    target_masked: usize,
    zero_weights: bool,
) -> Result<(usize, Vec<usize>)> {
    check_scores(net, scores)?;
    let already = net.total_hidden() - net.alive_hidden();
    if target_masked <= already {
        return Ok((0, Vec::new()));
    }
    let mut candidates: Vec<(usize, usize)> = net
        .hidden_layers()
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            layer
                .mask()
                .iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(move |(i, _)| (l, i))
        })
        .collect();
    candidates.sort_by(|&(la, ia), &(lb, ib)| {
        scores[la][ia]
            .total_cmp(&scores[lb][ib])
            .then(la.cmp(&lb))
            .then(ia.cmp(&ib))
    });
    candidates.truncate(target_masked - already);
    apply_selection(net, scores, candidates, zero_weights)
}

/// Threshold mode: masks every alive neuron whose score is strictly below `threshold`.
pub fn mask_below(
    net: &mut MaskedMlp,
    scores: &[Vec<f64>],
    threshold: f64,
    zero_weights: bool,
) -> Result<(usize, Vec<usize>)> {
    check_scores(net, scores)?;
    let chosen: Vec<(usize, usize)> = net
        .hidden_layers()
        .iter()
        .enumerate()
        .flat_map(|(l, layer)| {
            layer
                .mask()
                .iter()
                .enumerate()
                .filter(move |&(i, &m)| m && scores[l][i] < threshold)
                .map(move |(i, _)| (l, i))
        })
        .collect();
    apply_selection(net, scores, chosen, zero_weights)
}

/// Number of neurons rank mode masks at sparsity `p` out of `hidden` neurons.
pub(crate) fn rank_target(p: f64, hidden: usize) -> usize {
    ((p * hidden as f64).floor() as usize).min(hidden)
}

/// Neuron-importance mask update at episode `t`. Newly masked neurons also lose their
/// incoming and outgoing weights.
pub fn update_masks(
    net: &mut MaskedMlp,
    report: &ImportanceReport,
    cfg: &PruneConfig,
    t: usize,
) -> Result<PruneEvent> {
    if cfg.strategy != Strategy::Dsp {
        return Err(Error::Strategy(cfg.strategy.name().to_string()));
    }
    let p_t = sparsity_schedule(t, cfg);
    let psi_t = super::dynamic_threshold(report, p_t);
    let (pruned, guarded_layers) = match cfg.threshold_mode {
        ThresholdMode::Rank => {
            let target = rank_target(p_t, net.total_hidden());
            mask_lowest(net, &report.per_layer, target, true)?
        }
        ThresholdMode::Eq16 => mask_below(net, &report.per_layer, psi_t, true)?,
    };
    Ok(PruneEvent {
        episode: t,
        strategy: Strategy::Dsp,
        p_t,
        psi_t,
        pruned,
        survivors: survivors(net),
        guarded_layers,
    })
}
