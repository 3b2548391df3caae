use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use refer::learners::advantage::{lower_triangular, AdvKind};
use refer::learners::ddpg::{self, DdpgNets};
use refer::learners::naf::{self, naf_q, NafNet};
use refer::learners::vracer::{self, VracerNet};
use refer::learners::{ReplayMode, Sample, StepContext};
use refer::par::Execution;
use refer::policy::{kl_divergence, GaussianPolicy};
use refer::rng;

fn samples(n: usize, ds: usize, da: usize, seed: u64) -> Vec<Sample> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || -> f64 { r.sample(StandardNormal) };
    (0..n)
        .map(|i| {
            let mean: Vec<f64> = (0..da).map(|_| 0.3 * g()).collect();
            let action = mean.iter().map(|m| m + 0.1 * g()).collect();
            Sample {
                state: (0..ds).map(|_| g()).collect(),
                action,
                behavior: GaussianPolicy::isotropic(mean, 0.2).unwrap(),
                reward: g(),
                next_state: (0..ds).map(|_| g()).collect(),
                next_terminal: i % 7 == 0,
                qret: g(),
                weight: 1.0,
            }
        })
        .collect()
}

fn ctx(beta: f64, exec: Execution) -> StepContext {
    StepContext {
        c_max: 2.0,
        beta,
        gamma: 0.99,
        rules: ReplayMode::Refer.rules(),
        exec,
    }
}

fn mean_kl(net: &VracerNet, batch: &[Sample]) -> f64 {
    batch
        .iter()
        .map(|s| kl_divergence(&s.behavior, &net.head(&s.state).unwrap().policy))
        .sum::<f64>()
        / batch.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pure_penalty_step_reduces_kl(seed in 0u64..10_000) {
        let batch = samples(40, 3, 2, seed);
        let mut net = VracerNet::new(3, 2, &[6], AdvKind::None, 0.3, &mut rng::seeded(seed)).unwrap();
        let before = mean_kl(&net, &batch);
        let g = vracer::batch_gradient(&net, &batch, &ctx(0.0, Execution::Sequential)).unwrap();
        let p: Vec<f64> = net.params().iter().zip(&g.grad).map(|(p, g)| p - 1e-3 * g).collect();
        net.set_params(&p).unwrap();
        prop_assert!(mean_kl(&net, &batch) < before);
    }

    #[test]
    fn naf_advantage_is_never_positive(
        raw in proptest::collection::vec(-3f64..3.0, 6),
        a in proptest::collection::vec(-2f64..2.0, 3),
        m in proptest::collection::vec(-2f64..2.0, 3),
        v in -5f64..5.0,
    ) {
        let l = lower_triangular(&raw, 3);
        prop_assert!(naf_q(v, &m, &l, &a) <= v);
        prop_assert_eq!(naf_q(v, &m, &l, &m), v);
    }

    #[test]
    fn parallel_and_sequential_gradients_agree(seed in 0u64..10_000, n in 1usize..100) {
        let batch = samples(n, 3, 2, seed);
        let net = VracerNet::new(3, 2, &[6], AdvKind::Quadratic, 0.3, &mut rng::seeded(seed)).unwrap();
        let a = vracer::batch_gradient(&net, &batch, &ctx(0.7, Execution::Sequential)).unwrap();
        let b = vracer::batch_gradient(&net, &batch, &ctx(0.7, Execution::Parallel)).unwrap();
        prop_assert_eq!(a.grad, b.grad);

        let nets = DdpgNets::new(3, 2, &[6], 0.2, &mut rng::seeded(seed)).unwrap();
        let a = ddpg::batch_gradients(&nets, &batch, &ctx(0.7, Execution::Sequential), 1e-4).unwrap();
        let b = ddpg::batch_gradients(&nets, &batch, &ctx(0.7, Execution::Parallel), 1e-4).unwrap();
        prop_assert_eq!(a.critic, b.critic);
        prop_assert_eq!(a.actor, b.actor);

        let net = NafNet::new(3, 2, &[6], 0.2, &mut rng::seeded(seed)).unwrap();
        let a = naf::batch_gradient(&net, &batch, &ctx(0.7, Execution::Sequential)).unwrap();
        let b = naf::batch_gradient(&net, &batch, &ctx(0.7, Execution::Parallel)).unwrap();
        prop_assert_eq!(a.0, b.0);
    }

    #[test]
    fn sample_stats_report_fresh_estimates(seed in 0u64..10_000) {
        let batch = samples(10, 3, 2, seed);
        let net = VracerNet::new(3, 2, &[6], AdvKind::None, 0.3, &mut rng::seeded(seed)).unwrap();
        let g = vracer::batch_gradient(&net, &batch, &ctx(0.5, Execution::Sequential)).unwrap();
        for (s, st) in batch.iter().zip(&g.stats) {
            let head = net.head(&s.state).unwrap();
            prop_assert_eq!(st.value, head.value);
            prop_assert_eq!(st.q_value, head.value);
            prop_assert_eq!(st.near, 0.5 < st.rho && st.rho < 2.0);
            prop_assert!((st.kl - kl_divergence(&s.behavior, &head.policy)).abs() < 1e-12);
        }
    }
}

#[test]
fn critic_decay_touches_weights_only() {
    let nets = DdpgNets::new(3, 1, &[4], 0.2, &mut rng::seeded(5)).unwrap();
    let batch: Vec<Sample> = Vec::new();
    let g = ddpg::batch_gradients(&nets, &batch, &ctx(1.0, Execution::Sequential), 0.5).unwrap();
    let critic = &nets.critic;
    for l in 0..critic.n_layers() {
        let (w, b) = critic.layer_range(l);
        for i in w {
            assert_eq!(g.critic[i], 0.5 * critic.values[i]);
        }
        for i in b {
            assert_eq!(g.critic[i], 0.0);
        }
    }
    assert!(g.actor.iter().all(|&x| x == 0.0));
}
