use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlprune::envs::{Action, EnvKind};
use rlprune::harness::{model_from_str, model_to_string};
use rlprune::metrics::model_counts;
use rlprune::nn::{Activation, MaskedMlp};
use rlprune::ppo::{Head, Policy};
use rlprune::pruning::{
    compact, mask_lowest, neuron_importance, penalty_and_grad, sparsity_schedule, PruneConfig,
};

fn random_net(seed: u64, dims: &[usize], act: Activation, mask_prob: f64) -> MaskedMlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = MaskedMlp::random(dims, act, Activation::Identity, &mut rng).unwrap();
    for l in 0..dims.len() - 2 {
        for i in 0..dims[l + 1] {
            if rng.gen_bool(mask_prob) && net.layers()[l].alive() > 1 {
                net.set_mask(l, i, false).unwrap();
            }
        }
    }
    net
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    (
        1usize..6,
        prop::collection::vec(1usize..12, 1..4),
        1usize..4,
    )
        .prop_map(|(i, h, o)| {
            let mut d = vec![i];
            d.extend(h);
            d.push(o);
            d
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compaction_preserves_outputs(seed in any::<u64>(), dims in dims_strategy(), p in 0.0f64..0.9) {
        let net = random_net(seed, &dims, Activation::Relu, p);
        let (c, map) = compact(&net).unwrap();
        prop_assert_eq!(c.alive_hidden(), net.alive_hidden());
        prop_assert_eq!(map.iter().map(Vec::len).sum::<usize>(), net.alive_hidden());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..10 {
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-3.0..3.0)).collect();
            prop_assert_eq!(net.predict(&x).unwrap(), c.predict(&x).unwrap());
        }
    }

    #[test]
    fn schedule_is_monotone_and_bounded(
        p_i in 0.0f64..0.5, gap in 0.01f64..0.5, t_start in 0usize..100,
        n in 1usize..50, freq in 1usize..20,
    ) {
        let cfg = PruneConfig {
            p_initial: p_i,
            p_final: p_i + gap,
            t_start,
            total_prune_steps: n,
            prune_frequency: freq,
            ..PruneConfig::default()
        };
        let end = cfg.schedule_end();
        let mut prev = sparsity_schedule(0, &cfg);
        for t in 0..end + 5 {
            let p = sparsity_schedule(t, &cfg);
            prop_assert!(p >= prev);
            prop_assert!(p >= cfg.p_initial && p <= cfg.p_final);
            prev = p;
        }
        prop_assert_eq!(sparsity_schedule(t_start, &cfg), cfg.p_initial);
        prop_assert_eq!(sparsity_schedule(end, &cfg), cfg.p_final);
    }

    #[test]
    fn rank_masking_hits_target_and_keeps_layers(
        seed in any::<u64>(), dims in dims_strategy(), frac in 0.0f64..1.0,
    ) {
        let mut net = random_net(seed, &dims, Activation::Tanh, 0.0);
        let total = net.total_hidden();
        let target = (frac * total as f64).floor() as usize;
        let scores = neuron_importance(&net).per_layer;
        let (_, guarded) = mask_lowest(&mut net, &scores, target, true).unwrap();
        prop_assert!(net.hidden_layers().iter().all(|l| l.alive() >= 1));
        prop_assert_eq!(net.total_hidden() - net.alive_hidden() + guarded.len(), target);
        // Pruned neurons have no weights left and no importance.
        let report = neuron_importance(&net);
        for (l, layer) in net.hidden_layers().iter().enumerate() {
            for (i, &m) in layer.mask().iter().enumerate() {
                if !m {
                    prop_assert_eq!(report.per_layer[l][i], 0.0);
                }
            }
        }
    }

    #[test]
    fn penalty_is_nonnegative_and_zero_at_zero_lambda(seed in any::<u64>(), dims in dims_strategy()) {
        let net = random_net(seed, &dims, Activation::Relu, 0.3);
        let (pen, _) = penalty_and_grad(&net, 1e-3);
        prop_assert!(pen >= 0.0);
        let (zero, g) = penalty_and_grad(&net, 0.0);
        prop_assert_eq!(zero, 0.0);
        prop_assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn counts_never_exceed_dense(seed in any::<u64>(), dims in dims_strategy(), p in 0.0f64..0.9) {
        let dense = random_net(seed, &dims, Activation::Relu, 0.0);
        let mut sparse = dense.clone();
        let scores = neuron_importance(&sparse).per_layer;
        let target = (p * sparse.total_hidden() as f64) as usize;
        mask_lowest(&mut sparse, &scores, target, true).unwrap();
        let (a, b) = (model_counts(&dense), model_counts(&sparse));
        prop_assert!(b.weights <= a.weights && b.flops <= a.flops && b.mults <= a.mults);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), dims in dims_strategy(), p in 0.0f64..0.9) {
        let mut dims = dims;
        let last = dims.len() - 1;
        dims[last] = dims[last].max(2);
        let net = random_net(seed, &dims, Activation::Tanh, p);
        let policy = Policy::new(net, Head::Categorical).unwrap();
        let back = model_from_str(&model_to_string(&policy)).unwrap();
        prop_assert_eq!(back.actor, policy.actor);
    }

    #[test]
    fn cartpole_return_is_episode_length(seed in any::<u64>()) {
        let mut env = EnvKind::CartPole.build();
        env.reset(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ret = 0.0;
        let mut steps = 0;
        loop {
            let t = env.step(&Action::Discrete(rng.gen_range(0..2))).unwrap();
            ret += t.reward;
            steps += 1;
            if t.done {
                break;
            }
        }
        prop_assert_eq!(ret, steps as f64);
        prop_assert!(ret <= 500.0);
    }
}
