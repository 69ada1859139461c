use std::time::Instant;

use log::{info, warn};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExperimentConfig;
use crate::envs::ActionSpace;
use crate::error::{Error, Result};
use crate::metrics::{episode_return, model_counts_with, MetricsRow};
use crate::nn::{Activation, MaskedMlp};
use crate::ppo::{ppo_update, Head, Optimizers, Policy, RolloutBuffer};
use crate::pruning::{
    baseline_prune, compact_policy, is_prune_event, neuron_importance, sparsity_schedule,
    update_masks, ImportanceReport, IndexMap, PruneConfig, PruneEvent, Strategy, WeightFreeze,
};

/// Independent random streams derived from one seed.
pub struct SeedStreams {
    pub env: ChaCha8Rng,
    pub init: ChaCha8Rng,
    pub shuffle: ChaCha8Rng,
    pub dropout: ChaCha8Rng,
    pub action: ChaCha8Rng,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            rng
        };
        Self {
            env: stream(1),
            init: stream(2),
            shuffle: stream(3),
            dropout: stream(4),
            action: stream(5),
        }
    }
}

/// Output of one training run. On divergence `error` is set and `rows` ends with an
/// error row whose return is NaN.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub strategy: Strategy,
    pub lambda: f64,
    pub ratio: f64,
    pub rows: Vec<MetricsRow>,
    pub prune_log: Vec<PruneEvent>,
    pub policy: Policy,
    pub critic: MaskedMlp,
    pub compact: Policy,
    pub index_map: IndexMap,
    pub importance: ImportanceReport,
    pub error: Option<String>,
}

impl RunResult {
    /// Mean return of the last `n` completed episodes.
    pub fn last_mean(&self, n: usize) -> f64 {
        last_mean(&self.rows, n)
    }
}

pub fn last_mean(rows: &[MetricsRow], n: usize) -> f64 {
    let finite: Vec<f64> = rows
        .iter()
        .map(|r| r.ret)
        .filter(|r| r.is_finite())
        .collect();
    let tail = &finite[finite.len().saturating_sub(n)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn build_policy(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<(Policy, MaskedMlp)> {
    let spec = cfg.env.build().spec().clone();
    let (out, head) = match spec.action_space {
        ActionSpace::Discrete(n) => (n, Head::Categorical),
        ActionSpace::Continuous { dim, .. } => (
            dim,
            Head::Gaussian {
                log_std: vec![cfg.init_log_std; dim],
            },
        ),
    };
    let mut dims = vec![spec.state_dim];
    dims.extend(&cfg.actor_hidden);
    dims.push(out);
    let actor = MaskedMlp::random(&dims, cfg.activation, Activation::Identity, rng)?;
    let mut cdims = vec![spec.state_dim];
    cdims.extend(&cfg.critic_hidden);
    cdims.push(1);
    let critic = MaskedMlp::random(&cdims, cfg.activation, Activation::Identity, rng)?;
    Ok((Policy::new(actor, head)?, critic))
}

/// Sparsity level in force at episode `t` for the configured strategy.
fn logged_sparsity(prune: &PruneConfig, t: usize) -> f64 {
    match prune.strategy {
        Strategy::None => 0.0,
        Strategy::Dropout | Strategy::Pops => {
            if t >= prune.t_start {
                prune.p_final
            } else {
                0.0
            }
        }
        _ => sparsity_schedule(t, prune),
    }
}

/// Trains one actor-critic pair with the configured strategy for `cfg.episodes` episodes.
///
/// Each episode: collect one full episode, run a PPO update once the buffer holds
/// `ppo.rollout_steps` transitions, then apply the strategy's pruning rule and log a row.
pub fn run_training(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let mut rngs = SeedStreams::new(seed);
    let mut env = cfg.env.build();
    let (mut policy, mut critic) = build_policy(cfg, &mut rngs.init)?;
    let prune = &cfg.prune;
    let penalty = prune.strategy.penalty(prune.lambda);
    let mut opt = Optimizers::from_config(&cfg.ppo)?;
    let mut buf = RolloutBuffer::new();
    let mut freeze: Option<WeightFreeze> = None;
    let mut rows = Vec::with_capacity(cfg.episodes);
    let mut prune_log = Vec::new();
    let mut error = None;

    for t in 0..cfg.episodes {
        let started = Instant::now();
        match run_episode(
            cfg,
            t,
            env.as_mut(),
            &mut policy,
            &mut critic,
            &mut buf,
            &mut opt,
            penalty.as_ref(),
            &mut rngs,
            &mut freeze,
        ) {
            Ok((ret, event)) => {
                if let Some(ev) = event {
                    prune_log.push(ev);
                }
                let p_t = logged_sparsity(prune, t);
                let report = neuron_importance(&policy.actor).with_target(p_t);
                let counts = model_counts_with(&policy.actor, cfg.count_critic.then_some(&critic));
                rows.push(MetricsRow {
                    episode: t,
                    ret,
                    neurons: counts.neurons,
                    weights: counts.weights,
                    flops: counts.flops,
                    p_t,
                    psi_t: report.threshold,
                    wall_time_ms: if cfg.log_wall_time {
                        started.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    },
                });
                if t % 50 == 49 {
                    info!(
                        "seed {seed} {} episode {}: last-30 return {:.2}, neurons {}",
                        prune.strategy,
                        t + 1,
                        last_mean(&rows, 30),
                        counts.neurons
                    );
                }
            }
            Err(e) => {
                let e = match e {
                    Error::NonFinite(detail) => Error::Diverged { episode: t, detail },
                    other => other,
                };
                warn!("seed {seed}: {e}");
                let counts = model_counts_with(&policy.actor, cfg.count_critic.then_some(&critic));
                rows.push(MetricsRow {
                    episode: t,
                    ret: f64::NAN,
                    neurons: counts.neurons,
                    weights: counts.weights,
                    flops: counts.flops,
                    p_t: logged_sparsity(prune, t),
                    psi_t: f64::NAN,
                    wall_time_ms: 0.0,
                });
                error = Some(e.to_string());
                break;
            }
        }
    }

    let (compact, index_map) = compact_policy(&policy)?;
    let importance = neuron_importance(&policy.actor);
    Ok(RunResult {
        seed,
        strategy: prune.strategy,
        lambda: prune.lambda,
        ratio: prune.p_final,
        rows,
        prune_log,
        policy,
        critic,
        compact,
        index_map,
        importance,
        error,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_episode(
    cfg: &ExperimentConfig,
    t: usize,
    env: &mut dyn crate::envs::Env,
    policy: &mut Policy,
    critic: &mut MaskedMlp,
    buf: &mut RolloutBuffer,
    opt: &mut Optimizers,
    penalty: &dyn crate::ppo::PenaltyHook,
    rngs: &mut SeedStreams,
    freeze: &mut Option<WeightFreeze>,
) -> Result<(f64, Option<PruneEvent>)> {
    let mut state = env.reset(rngs.env.next_u64());
    let mut rewards = Vec::new();
    loop {
        let (action, log_prob) = policy.act(&state, &mut rngs.action)?;
        let value = critic.predict(&state)?[0];
        if !value.is_finite() || !log_prob.is_finite() {
            return Err(Error::NonFinite(format!(
                "rollout: value {value}, log-prob {log_prob}"
            )));
        }
        let tr = env.step(&action)?;
        rewards.push(tr.reward);
        buf.push(
            state,
            action,
            log_prob,
            tr.reward,
            value,
            tr.next_state.clone(),
            tr.terminated,
            tr.done,
        );
        state = tr.next_state;
        if tr.done {
            break;
        }
    }
    let ret = episode_return(&rewards);

    if buf.len() >= cfg.ppo.rollout_steps {
        buf.finalize(cfg.ppo.gamma, cfg.ppo.normalize_advantages)?;
        ppo_update(
            policy,
            critic,
            buf,
            &cfg.ppo,
            penalty,
            opt,
            &mut rngs.shuffle,
        )?;
        buf.clear();
        if let Some(f) = freeze {
            f.apply(&mut policy.actor);
        }
    }

    let prune = &cfg.prune;
    let event = match prune.strategy {
        Strategy::None => None,
        Strategy::Dsp => {
            if is_prune_event(t, prune) {
                let report = neuron_importance(&policy.actor);
                Some(update_masks(&mut policy.actor, &report, prune, t)?)
            } else {
                None
            }
        }
        s => {
            let ev = baseline_prune(
                &mut policy.actor,
                s,
                prune.p_final,
                t,
                prune,
                &mut rngs.dropout,
            )?;
            if s == Strategy::Pops && ev.is_some() {
                *freeze = Some(WeightFreeze::from_zeros(&policy.actor));
            }
            ev
        }
    };
    Ok((ret, event))
}
