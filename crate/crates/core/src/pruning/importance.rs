use crate::error::Result;
use crate::nn::{Grads, MaskedMlp};
use crate::ppo::PenaltyHook;

/// Per-hidden-layer neuron importances plus the threshold they were compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub per_layer: Vec<Vec<f64>>,
    pub total: f64,
    pub threshold: f64,
    pub sparsity_target: f64,
}

impl ImportanceReport {
    /// Records `p_t` and `ψ_t = p_t · ΣΩ`.
    pub fn with_target(mut self, p_t: f64) -> Self {
        self.sparsity_target = p_t;
        self.threshold = super::dynamic_threshold(&self, p_t);
        self
    }
}

fn row_sq_sums(net: &MaskedMlp, layer: usize) -> Vec<f64> {
    let w = net.layers()[layer].weights();
    (0..w.rows())
        .map(|r| w.row(r).iter().map(|v| v * v).sum())
        .collect()
}

fn col_sq_sums(net: &MaskedMlp, layer: usize) -> Vec<f64> {
    let w = net.layers()[layer].weights();
    let mut out = vec![0.0; w.cols()];
    for r in 0..w.rows() {
        for (o, v) in out.iter_mut().zip(w.row(r)) {
            *o += v * v;
        }
    }
    out
}

/// `Ω[l][i] = (Σ_j W[l][i,j]²) · (Σ_k W[l+1][k,i]²) · m[l][i]` for every hidden neuron.
pub fn neuron_importance(net: &MaskedMlp) -> ImportanceReport {
    let mut per_layer = Vec::with_capacity(net.num_layers() - 1);
    for l in 0..net.num_layers() - 1 {
        let incoming = row_sq_sums(net, l);
        let outgoing = col_sq_sums(net, l + 1);
        let mask = net.layers()[l].mask();
        per_layer.push(
            incoming
                .iter()
                .zip(&outgoing)
                .zip(mask)
                .map(|((a, b), &m)| if m { a * b } else { 0.0 })
                .collect::<Vec<f64>>(),
        );
    }
    let total = per_layer.iter().flatten().sum();
    ImportanceReport {
        per_layer,
        total,
        threshold: 0.0,
        sparsity_target: 0.0,
    }
}

/// `λ·ΣΩ` and its gradient with respect to every weight.
pub fn penalty_and_grad(net: &MaskedMlp, lambda: f64) -> (f64, Grads) {
    let mut grads = Grads::zeros_like(net);
    if lambda == 0.0 {
        return (0.0, grads);
    }
    let mut total = 0.0;
    for l in 0..net.num_layers() - 1 {
        let incoming = row_sq_sums(net, l);
        let outgoing = col_sq_sums(net, l + 1);
        let mask = net.layers()[l].mask();
        let w_in = net.layers()[l].weights();
        let w_out = net.layers()[l + 1].weights();
        for i in 0..incoming.len() {
            if !mask[i] {
                continue;
            }
            total += incoming[i] * outgoing[i];
            let s_in = 2.0 * lambda * outgoing[i];
            for (g, w) in grads.layers[l].row_mut(i).iter_mut().zip(w_in.row(i)) {
                *g += s_in * w;
            }
            let s_out = 2.0 * lambda * incoming[i];
            let g_out = &mut grads.layers[l + 1];
            for k in 0..w_out.rows() {
                let v = g_out.get(k, i) + s_out * w_out.get(k, i);
                g_out.set(k, i, v);
            }
        }
    }
    (lambda * total, grads)
}

/// [`PenaltyHook`] for the neuron-importance regulariser.
#[derive(Debug, Clone, Copy)]
pub struct ImportancePenalty {
    pub lambda: f64,
}

impl PenaltyHook for ImportancePenalty {
    fn penalty_and_grad(&self, net: &MaskedMlp) -> Result<(f64, Grads)> {
        Ok(penalty_and_grad(net, self.lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, Activation, MaskedLayer, Mat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn two_two_one() -> MaskedMlp {
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

    #[test]
    fn hand_example() {
        let r = neuron_importance(&two_two_one());
        assert_eq!(r.per_layer, vec![vec![5.0, 9.0]]);
        assert_eq!(r.total, 14.0);
    }

    #[test]
    fn zero_incoming_and_masked_are_zero() {
        let mut net = two_two_one();
        net.weights_mut(0).row_mut(0).fill(0.0);
        assert_eq!(neuron_importance(&net).per_layer[0][0], 0.0);
        let mut net = two_two_one();
        net.set_mask(0, 1, false).unwrap();
        assert_eq!(neuron_importance(&net).per_layer[0][1], 0.0);
    }

    #[test]
    fn single_neuron_closed_form() {
        let (a, b, lambda) = (0.7, -1.3, 0.25);
        let net = MaskedMlp::new(vec![
            MaskedLayer::dense(Mat::from_rows(&[vec![a]]).unwrap(), Activation::Tanh),
            MaskedLayer::dense(Mat::from_rows(&[vec![b]]).unwrap(), Activation::Identity),
        ])
        .unwrap();
        let (p, g) = penalty_and_grad(&net, lambda);
        assert!((p - lambda * a * a * b * b).abs() < 1e-15);
        assert!((g.layers[0].get(0, 0) - 2.0 * lambda * a * b * b).abs() < 1e-15);
        assert!((g.layers[1].get(0, 0) - 2.0 * lambda * b * a * a).abs() < 1e-15);
    }

    #[test]
    fn zero_lambda() {
        let (p, g) = penalty_and_grad(&two_two_one(), 0.0);
        assert_eq!(p, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net =
            MaskedMlp::random(&[4, 8, 2], Activation::Relu, Activation::Identity, &mut rng)
                .unwrap();
        net.set_mask(0, 3, false).unwrap();
        let (_, g) = penalty_and_grad(&net, 0.7);
        let err = grad_check(&net, |n| Ok(penalty_and_grad(n, 0.7).0), &g, 1e-6).unwrap();
        assert!(err < 1e-6, "err = {err}");
    }
}
