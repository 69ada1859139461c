use super::{Policy, PolicyGrads, RolloutBuffer};
use crate::error::{Error, Result};
use crate::nn::{Grads, MaskedMlp};

/// `min(ρ·A, clip(ρ, 1-ε, 1+ε)·A)`.
#[inline]
pub fn surrogate_term(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Mean clipped surrogate over the whole buffer (an objective to maximise).
pub fn actor_loss(
    buf: &RolloutBuffer,
    policy: &Policy,
    old_log_probs: &[f64],
    clip_eps: f64,
) -> Result<f64> {
    if !buf.is_finalized() {
        return Err(Error::EmptyBuffer);
    }
    if old_log_probs.len() != buf.len() {
        return Err(Error::shape(
            "old log-probs",
            buf.len(),
            old_log_probs.len(),
        ));
    }
    let mut total = 0.0;
    for t in 0..buf.len() {
        let lp = policy.log_prob(&buf.states[t], &buf.actions[t])?;
        let ratio = (lp - old_log_probs[t]).exp();
        total += surrogate_term(ratio, buf.advantages[t], clip_eps);
    }
    Ok(total / buf.len() as f64)
}

/// Mean surrogate over `indices` and the gradient of its *negation* (a descent direction).
pub fn actor_objective_and_grad(
    buf: &RolloutBuffer,
    policy: &Policy,
    indices: &[usize],
    clip_eps: f64,
) -> Result<(f64, PolicyGrads)> {
    let mut grads = PolicyGrads::zeros_like(policy);
    if indices.is_empty() {
        return Ok((0.0, grads));
    }
    let n = indices.len() as f64;
    let mut total = 0.0;
    for &t in indices {
        let lpg = policy.log_prob_grad(&buf.states[t], &buf.actions[t])?;
        let ratio = (lpg.log_prob - buf.log_probs[t]).exp();
        let adv = buf.advantages[t];
        let unclipped = ratio * adv;
        let term = surrogate_term(ratio, adv, clip_eps);
        total += term;
        // The clipped branch is constant in the parameters.
        if unclipped > term {
            continue;
        }
        let coef = -ratio * adv / n;
        policy
            .actor
            .backward_accumulate(&lpg.tape, &lpg.d_output, coef, &mut grads.net)?;
        for (g, d) in grads.log_std.iter_mut().zip(&lpg.d_log_std) {
            *g += coef * d;
        }
    }
    Ok((total / n, grads))
}

fn td_error(
    buf: &RolloutBuffer,
    critic: &MaskedMlp,
    gamma: f64,
    t: usize,
) -> Result<(f64, f64, f64)> {
    let v = critic.predict(&buf.states[t])?[0];
    let v_next = if buf.terminals[t] {
        0.0
    } else {
        critic.predict(&buf.next_states[t])?[0]
    };
    Ok((buf.rewards[t] + gamma * v_next - v, v, v_next))
}

/// Mean squared TD error `(r + γ V(s') - V(s))²` with `V(terminal) = 0`.
pub fn critic_loss(buf: &RolloutBuffer, critic: &MaskedMlp, gamma: f64) -> Result<f64> {
    if buf.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut total = 0.0;
    for t in 0..buf.len() {
        let (delta, _, _) = td_error(buf, critic, gamma, t)?;
        total += delta * delta;
    }
    Ok(total / buf.len() as f64)
}

/// Mean squared TD error over `indices` and its full gradient (through both `V(s)` and
/// `V(s')`).
pub fn critic_loss_and_grad(
    buf: &RolloutBuffer,
    critic: &MaskedMlp,
    gamma: f64,
    indices: &[usize],
) -> Result<(f64, Grads)> {
    let mut grads = Grads::zeros_like(critic);
    if indices.is_empty() {
        return Ok((0.0, grads));
    }
    let n = indices.len() as f64;
    let mut total = 0.0;
    for &t in indices {
        let (v, tape) = critic.forward(&buf.states[t])?;
        let (v_next, next_tape) = if buf.terminals[t] {
            (0.0, None)
        } else {
            let (out, tape) = critic.forward(&buf.next_states[t])?;
            (out[0], Some(tape))
        };
        let delta = buf.rewards[t] + gamma * v_next - v[0];
        total += delta * delta;
        critic.backward_accumulate(&tape, &[1.0], -2.0 * delta / n, &mut grads)?;
        if let Some(next_tape) = next_tape {
            critic.backward_accumulate(&next_tape, &[1.0], 2.0 * gamma * delta / n, &mut grads)?;
        }
    }
    Ok((total / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Action;
    use crate::nn::{grad_check, Activation, MaskedLayer, Mat};
    use crate::ppo::Head;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn surrogate_cases() {
        assert_eq!(surrogate_term(1.0, 1.0, 0.2), 1.0);
        assert!((surrogate_term(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((surrogate_term(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    fn zero_critic(in_dim: usize) -> MaskedMlp {
        MaskedMlp::new(vec![MaskedLayer::dense(
            Mat::zeros(1, in_dim),
            Activation::Identity,
        )])
        .unwrap()
    }

    #[test]
    fn critic_loss_zero_value() {
        let mut buf = RolloutBuffer::new();
        buf.push(
            vec![1.0],
            Action::Discrete(0),
            0.0,
            1.0,
            0.0,
            vec![2.0],
            true,
            true,
        );
        assert_eq!(critic_loss(&buf, &zero_critic(1), 0.99).unwrap(), 1.0);
    }

    #[test]
    fn critic_loss_two_steps_by_hand() {
        // V(s) = w * s with w = 0.5; states 1 -> 2 -> terminal.
        let critic = MaskedMlp::new(vec![MaskedLayer::dense(
            Mat::from_rows(&[vec![0.5]]).unwrap(),
            Activation::Identity,
        )])
        .unwrap();
        let mut buf = RolloutBuffer::new();
        buf.push(
            vec![1.0],
            Action::Discrete(0),
            0.0,
            1.0,
            0.5,
            vec![2.0],
            false,
            false,
        );
        buf.push(
            vec![2.0],
            Action::Discrete(0),
            0.0,
            2.0,
            1.0,
            vec![3.0],
            true,
            true,
        );
        // δ0 = 1 + 0.9*1.0 - 0.5 = 1.4, δ1 = 2 + 0 - 1.0 = 1.0
        let expected = (1.4f64 * 1.4 + 1.0) / 2.0;
        assert!((critic_loss(&buf, &critic, 0.9).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn perfect_critic_has_zero_td_error() {
        // Deterministic chain with rewards 1 and γ = 1: V(s_t) = steps remaining.
        // Encode the state as the remaining count so a linear critic can be exact.
        let critic = MaskedMlp::new(vec![MaskedLayer::dense(
            Mat::from_rows(&[vec![1.0]]).unwrap(),
            Activation::Identity,
        )])
        .unwrap();
        let mut buf = RolloutBuffer::new();
        for k in (1..=4).rev() {
            let end = k == 1;
            buf.push(
                vec![k as f64],
                Action::Discrete(0),
                0.0,
                1.0,
                k as f64,
                vec![(k - 1) as f64],
                end,
                end,
            );
        }
        assert!(critic_loss(&buf, &critic, 1.0).unwrap() < 1e-24);
    }

    fn random_buffer(rng: &mut ChaCha8Rng, policy: &Policy, n: usize) -> RolloutBuffer {
        let mut buf = RolloutBuffer::new();
        for i in 0..n {
            let s: Vec<f64> = (0..policy.actor.input_dim())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let ns: Vec<f64> = (0..policy.actor.input_dim())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let (a, lp) = policy.act(&s, rng).unwrap();
            let end = i % 5 == 4;
            // Offset old log-probs so some ratios sit inside and some outside the clip range.
            let old = lp + rng.gen_range(-0.5..0.5);
            buf.push(s, a, old, rng.gen_range(-1.0..1.0), 0.0, ns, end, end);
        }
        buf.finalize(0.9, false).unwrap();
        for a in buf.advantages.iter_mut() {
            *a = rng.gen_range(-2.0..2.0);
        }
        buf
    }

    #[test]
    fn actor_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = MaskedMlp::random(&[4, 6, 3], Activation::Tanh, Activation::Identity, &mut rng)
            .unwrap();
        let policy = Policy::new(net, Head::Categorical).unwrap();
        let buf = random_buffer(&mut rng, &policy, 12);
        let idx: Vec<usize> = (0..buf.len()).collect();
        let (_, g) = actor_objective_and_grad(&buf, &policy, &idx, 0.2).unwrap();
        let err = grad_check(
            &policy.actor,
            |n| {
                let p = Policy::new(n.clone(), Head::Categorical)?;
                actor_loss(&buf, &p, &buf.log_probs, 0.2).map(|j| -j)
            },
            &g.net,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "err = {err}");
    }

    #[test]
    fn critic_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let net = MaskedMlp::random(&[4, 6, 3], Activation::Tanh, Activation::Identity, &mut rng)
            .unwrap();
        let policy = Policy::new(net, Head::Categorical).unwrap();
        let buf = random_buffer(&mut rng, &policy, 10);
        let critic =
            MaskedMlp::random(&[4, 7, 1], Activation::Tanh, Activation::Identity, &mut rng)
                .unwrap();
        let idx: Vec<usize> = (0..buf.len()).collect();
        let (loss, g) = critic_loss_and_grad(&buf, &critic, 0.9, &idx).unwrap();
        assert!((loss - critic_loss(&buf, &critic, 0.9).unwrap()).abs() < 1e-12);
        let err = grad_check(&critic, |c| critic_loss(&buf, c, 0.9), &g, 1e-6).unwrap();
        assert!(err < 1e-5, "err = {err}");
    }

    #[test]
    fn ratio_is_one_right_after_collection() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let net = MaskedMlp::random(&[4, 6, 2], Activation::Relu, Activation::Identity, &mut rng)
            .unwrap();
        let policy = Policy::new(net, Head::Categorical).unwrap();
        for _ in 0..50 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, lp) = policy.act(&s, &mut rng).unwrap();
            assert_eq!((policy.log_prob(&s, &a).unwrap() - lp).exp(), 1.0);
        }
    }
}
