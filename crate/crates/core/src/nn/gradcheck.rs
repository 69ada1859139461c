use super::{Grads, MaskedMlp};
use crate::error::{Error, Result};

/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// `|analytic - numeric| / max(|numeric|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(GRAD_CHECK_FLOOR)
}

/// Compares `analytic` against central differences of `loss` for every weight and
/// returns the worst relative error.
pub fn grad_check<F>(net: &MaskedMlp, loss: F, analytic: &Grads, eps: f64) -> Result<f64>
where
    F: Fn(&MaskedMlp) -> Result<f64>,
{
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::Config(format!(
            "finite-difference step {eps} not in (0, 1e-3]"
        )));
    }
    analytic.check_shapes(net)?;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for l in 0..net.num_layers() {
        let len = net.layers()[l].weights().data().len();
        for k in 0..len {
            let orig = net.layers()[l].weights().data()[k];
            probe.weights_mut(l).data_mut()[k] = orig + eps;
            let plus = loss(&probe)?;
            probe.weights_mut(l).data_mut()[k] = orig - eps;
            let minus = loss(&probe)?;
            probe.weights_mut(l).data_mut()[k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss while perturbing layer {l} weight {k}"
                )));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(analytic.layers[l].data()[k], numeric));
        }
    }
    Ok(worst)
}
