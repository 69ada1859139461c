use crate::error::Result;
use crate::nn::{MaskedLayer, MaskedMlp};
use crate::ppo::Policy;

/// Original indices of the surviving neurons, one list per hidden layer.
pub type IndexMap = Vec<Vec<usize>>;

/// Physically removes every masked hidden neuron: its row in layer `l` and its column in
/// layer `l + 1`. The result has all-ones masks and computes the same function.
pub fn compact(net: &MaskedMlp) -> Result<(MaskedMlp, IndexMap)> {
    let layers = net.layers();
    let mut index_map: IndexMap = Vec::with_capacity(layers.len() - 1);
    let mut keep_cols: Vec<usize> = (0..net.input_dim()).collect();
    let mut out = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let keep_rows: Vec<usize> = layer
            .mask()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
            .collect();
        let weights = layer.weights().select(&keep_rows, &keep_cols);
        out.push(MaskedLayer::dense(weights, layer.activation()));
        if l + 1 < layers.len() {
            index_map.push(keep_rows.clone());
        }
        keep_cols = keep_rows;
    }
    Ok((MaskedMlp::from_parts(out)?, index_map))
}

/// Compacts a policy's actor; head parameters are unchanged.
pub fn compact_policy(policy: &Policy) -> Result<(Policy, IndexMap)> {
    let (actor, map) = compact(&policy.actor)?;
    Ok((Policy::new(actor, policy.head.clone())?, map))
}
