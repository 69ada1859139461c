use rand::Rng;
use rand_distr::StandardNormal;

use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::{GradTape, Grads, MaskedMlp};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// How actor outputs become an action distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Softmax over the actor's logits.
    Categorical,
    /// Actor outputs the mean; the per-dimension log standard deviation is a free parameter.
    Gaussian { log_std: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: MaskedMlp,
    pub head: Head,
}

/// Gradient of a policy-level scalar with respect to all policy parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrads {
    pub net: Grads,
    pub log_std: Vec<f64>,
}

impl PolicyGrads {
    pub fn zeros_like(policy: &Policy) -> Self {
        Self {
            net: Grads::zeros_like(&policy.actor),
            log_std: vec![0.0; policy.log_std().map_or(0, <[f64]>::len)],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }
}

/// `log π(a|s)` together with its derivative with respect to the actor output.
#[derive(Debug, Clone)]
pub struct LogProbGrad {
    pub log_prob: f64,
    pub tape: GradTape,
    pub d_output: Vec<f64>,
    pub d_log_std: Vec<f64>,
}

impl Policy {
    pub fn new(actor: MaskedMlp, head: Head) -> Result<Self> {
        if let Head::Gaussian { log_std } = &head {
            if log_std.len() != actor.output_dim() {
                return Err(Error::shape("log_std", actor.output_dim(), log_std.len()));
            }
            if log_std.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("log_std".into()));
            }
        } else if actor.output_dim() < 2 {
            return Err(Error::Config(
                "categorical head needs at least two logits".into(),
            ));
        }
        Ok(Self { actor, head })
    }

    pub fn log_std(&self) -> Option<&[f64]> {
        match &self.head {
            Head::Gaussian { log_std } => Some(log_std),
            Head::Categorical => None,
        }
    }

    pub fn log_std_mut(&mut self) -> Option<&mut Vec<f64>> {
        match &mut self.head {
            Head::Gaussian { log_std } => Some(log_std),
            Head::Categorical => None,
        }
    }

    /// Action probabilities of a categorical head.
    pub fn probabilities(&self, state: &[f64]) -> Result<Vec<f64>> {
        match self.head {
            Head::Categorical => {
                let logits = self.actor.predict(state)?;
                Ok(log_softmax(&logits).into_iter().map(f64::exp).collect())
            }
            Head::Gaussian { .. } => Err(Error::Config(
                "probabilities are only defined for a categorical head".into(),
            )),
        }
    }

    /// Samples an action and returns it with its log-probability.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<(Action, f64)> {
        let out = self.actor.predict(state)?;
        let action = match &self.head {
            Head::Categorical => {
                let logp = log_softmax(&out);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = logp.len() - 1;
                for (i, lp) in logp.iter().enumerate() {
                    acc += lp.exp();
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                Action::Discrete(pick)
            }
            Head::Gaussian { log_std } => Action::Continuous(
                out.iter()
                    .zip(log_std)
                    .map(|(mu, ls)| {
                        let z: f64 = rng.sample(StandardNormal);
                        mu + ls.exp() * z
                    })
                    .collect(),
            ),
        };
        let lp = self.log_prob_of_output(&out, &action)?;
        Ok((action, lp))
    }

    /// Most likely action (argmax logit, or the Gaussian mean).
    pub fn greedy(&self, state: &[f64]) -> Result<Action> {
        let out = self.actor.predict(state)?;
        Ok(match self.head {
            Head::Categorical => Action::Discrete(argmax(&out)),
            Head::Gaussian { .. } => Action::Continuous(out),
        })
    }

    pub fn log_prob(&self, state: &[f64], action: &Action) -> Result<f64> {
        let out = self.actor.predict(state)?;
        self.log_prob_of_output(&out, action)
    }

    fn log_prob_of_output(&self, out: &[f64], action: &Action) -> Result<f64> {
        match (&self.head, action) {
            (Head::Categorical, Action::Discrete(a)) => {
                let logp = log_softmax(out);
                logp.get(*a).copied().ok_or_else(|| {
                    Error::InvalidAction(format!("action {a} out of {} logits", logp.len()))
                })
            }
            (Head::Gaussian { log_std }, Action::Continuous(a)) => {
                if a.len() != out.len() {
                    return Err(Error::shape("continuous action", out.len(), a.len()));
                }
                Ok(out
                    .iter()
                    .zip(log_std)
                    .zip(a)
                    .map(|((mu, ls), x)| {
                        let z = (x - mu) / ls.exp();
                        -0.5 * z * z - ls - 0.5 * LN_2PI
                    })
                    .sum())
            }
            (_, other) => Err(Error::InvalidAction(format!(
                "{other:?} does not match the policy head"
            ))),
        }
    }

    /// Log-probability and its gradient with respect to the actor output and log-std.
    pub fn log_prob_grad(&self, state: &[f64], action: &Action) -> Result<LogProbGrad> {
        let (out, tape) = self.actor.forward(state)?;
        let log_prob = self.log_prob_of_output(&out, action)?;
        let (d_output, d_log_std) = match (&self.head, action) {
            (Head::Categorical, Action::Discrete(a)) => {
                let probs: Vec<f64> = log_softmax(&out).into_iter().map(f64::exp).collect();
                let d = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| if i == *a { 1.0 - p } else { -p })
                    .collect();
                (d, Vec::new())
            }
            (Head::Gaussian { log_std }, Action::Continuous(a)) => {
                let mut d_mu = Vec::with_capacity(out.len());
                let mut d_ls = Vec::with_capacity(out.len());
                for ((mu, ls), x) in out.iter().zip(log_std).zip(a) {
                    let var = (2.0 * ls).exp();
                    let diff = x - mu;
                    d_mu.push(diff / var);
                    d_ls.push(diff * diff / var - 1.0);
                }
                (d_mu, d_ls)
            }
            _ => unreachable!("validated by log_prob_of_output"),
        };
        Ok(LogProbGrad {
            log_prob,
            tape,
            d_output,
            d_log_std,
        })
    }
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn categorical(seed: u64) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = MaskedMlp::random(&[4, 8, 3], Activation::Tanh, Activation::Identity, &mut rng)
            .unwrap();
        Policy::new(net, Head::Categorical).unwrap()
    }

    fn gaussian(seed: u64) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = MaskedMlp::random(&[3, 8, 2], Activation::Tanh, Activation::Identity, &mut rng)
            .unwrap();
        Policy::new(
            net,
            Head::Gaussian {
                log_std: vec![-0.3, 0.2],
            },
        )
        .unwrap()
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = categorical(0);
        let probs = p.probabilities(&[0.1, -0.2, 0.3, 0.05]).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampled_log_prob_reproduces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [categorical(1), gaussian(2)] {
            let s = vec![0.2; p.actor.input_dim()];
            for _ in 0..20 {
                let (a, lp) = p.act(&s, &mut rng).unwrap();
                assert_eq!(p.log_prob(&s, &a).unwrap(), lp);
                assert_eq!(p.log_prob_grad(&s, &a).unwrap().log_prob, lp);
            }
        }
    }

    #[test]
    fn log_prob_output_gradient_matches_differences() {
        let p = gaussian(3);
        let s = [0.3, -0.1, 0.7];
        let a = Action::Continuous(vec![0.4, -0.9]);
        let g = p.log_prob_grad(&s, &a).unwrap();
        let eps = 1e-6;
        for k in 0..2 {
            let mut hi = p.clone();
            hi.log_std_mut().unwrap()[k] += eps;
            let mut lo = p.clone();
            lo.log_std_mut().unwrap()[k] -= eps;
            let fd = (hi.log_prob(&s, &a).unwrap() - lo.log_prob(&s, &a).unwrap()) / (2.0 * eps);
            assert!((fd - g.d_log_std[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn gaussian_log_prob_closed_form() {
        let p = gaussian(4);
        let s = [0.0, 0.0, 0.0];
        let mu = p.actor.predict(&s).unwrap();
        let lp = p.log_prob(&s, &Action::Continuous(mu.clone())).unwrap();
        let expected: f64 = [-0.3f64, 0.2].iter().map(|ls| -ls - 0.5 * LN_2PI).sum();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn head_mismatch_rejected() {
        let p = categorical(5);
        assert!(p
            .log_prob(&[0.0; 4], &Action::Continuous(vec![0.0]))
            .is_err());
        assert!(p.log_prob(&[0.0; 4], &Action::Discrete(7)).is_err());
    }
}
