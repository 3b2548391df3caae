use super::*;
use crate::learners::retrace::vtbc_backward;
use crate::rng;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;

fn cfg(capacity: usize, n_start: usize) -> ReplayConfig {
    ReplayConfig {
        capacity,
        n_start,
        gamma: 0.9,
        far_target: 0.1,
    }
}

/// Episode with `len` observations of a 1-D state and action.
fn episode(len: usize, closing: Closing, rewards: &[f64]) -> Episode {
    let steps = (0..len)
        .map(|t| {
            let closing_step = t + 1 == len;
            TimeStep {
                state: vec![t as f64],
                action: (!closing_step).then(|| vec![0.1 * t as f64]),
                reward: if t == 0 { 0.0 } else { rewards.get(t - 1).copied().unwrap_or(1.0) },
                behavior: (!closing_step)
                    .then(|| GaussianPolicy::new(vec![0.0], vec![0.5]).unwrap()),
                value: if closing_step && closing == Closing::Terminal { 0.0 } else { 0.5 },
            }
        })
        .collect();
    Episode { steps, closing }
}

fn recount(rm: &ReplayMemory, c_max: f64) -> usize {
    let mut n = 0;
    for id in rm.episode_ids() {
        let (_, _, _, rhos, _) = rm.episode_caches(id).unwrap();
        n += rhos.iter().filter(|&&r| classify(r, c_max) == Proximity::Far).count();
    }
    n
}

#[test]
fn add_to_empty() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    assert_eq!(rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap(), 0);
    assert_eq!(rm.n_obs(), 5);
    assert_eq!(rm.n_samples(), 4);
}

#[test]
fn fifo_eviction_whole_episodes() {
    let mut rm = ReplayMemory::new(cfg(10, 1), 1, 1);
    rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap();
    rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap();
    assert_eq!(rm.n_obs(), 10);
    assert_eq!(rm.add_episode(episode(3, Closing::Terminal, &[])).unwrap(), 1);
    assert_eq!(rm.n_obs(), 8);
    assert_eq!(rm.episode_ids().collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn eviction_removes_far_count() {
    let mut rm = ReplayMemory::new(cfg(10, 1), 1, 1);
    rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap();
    rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap();
    let c = 2.0;
    for (ep, step) in [(0, 0), (0, 2), (0, 3), (1, 1)] {
        rm.refresh_sample(StepRef { episode: ep, step }, 0.5, 10.0, c).unwrap();
    }
    assert_eq!(rm.n_far(), 4);
    rm.add_episode(episode(3, Closing::Terminal, &[])).unwrap();
    assert_eq!(rm.n_far(), 1);
    assert_eq!(rm.n_far(), recount(&rm, c));
}

#[test]
fn rejects_malformed() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    let mut e = episode(4, Closing::Terminal, &[]);
    e.steps[0].reward = 1.0;
    assert!(matches!(rm.add_episode(e), Err(Error::MalformedEpisode(_))));
    let mut e = episode(4, Closing::Terminal, &[]);
    e.steps[3].value = 2.0;
    assert!(rm.add_episode(e).is_err());
    let mut e = episode(4, Closing::Truncated, &[]);
    e.steps[1].action = None;
    assert!(rm.add_episode(e).is_err());
    assert!(rm.add_episode(episode(1, Closing::Terminal, &[])).is_err());
    let mut e = episode(4, Closing::Truncated, &[]);
    e.steps[2].state = vec![0.0, 1.0];
    assert!(rm.add_episode(e).is_err());
    assert_eq!(rm.n_obs(), 0);
}

#[test]
fn classification_boundaries() {
    assert_eq!(classify(1.0, 1.0001), Proximity::Near);
    assert_eq!(classify(5.0, 4.0), Proximity::Far);
    assert_eq!(classify(0.25, 4.0), Proximity::Far);
    assert_eq!(classify(4.0, 4.0), Proximity::Far);
    assert_eq!(classify(0.2501, 4.0), Proximity::Near);
}

#[test]
fn beta_update_values_and_fixed_points() {
    assert_abs_diff_eq!(update_beta(0.5, 20, 100, 0.1, 1e-4), 0.49995, epsilon = 1e-15);
    assert_abs_diff_eq!(update_beta(0.5, 5, 100, 0.1, 1e-4), 0.50005, epsilon = 1e-15);
    let mut hi = 0.5;
    let mut lo = 0.5;
    for _ in 0..200_000 {
        hi = update_beta(hi, 1, 100, 0.1, 1e-4);
        lo = update_beta(lo, 50, 100, 0.1, 1e-4);
    }
    assert!(hi > 1.0 - 1e-6);
    assert!(lo < 1e-6);
}

#[test]
fn initial_targets_use_acting_values() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    let e = episode(4, Closing::Truncated, &[1.0, -1.0, 2.0]);
    rm.add_episode(e).unwrap();
    let (rew, val, _, rhos, _) = rm.episode_caches(0).unwrap();
    assert_eq!(rhos, &[1.0, 1.0, 1.0]);
    let (v, q) = vtbc_backward(rew, val, None, rhos, 0.9, rm.reward_divisor());
    let (sv, sq) = rm.episode_targets(0).unwrap();
    assert_eq!(sv, v.as_slice());
    assert_eq!(sq, q.as_slice());
    // truncated: bootstrap from the closing value
    assert_eq!(sv[3], 0.5);
}

#[test]
fn refresh_is_idempotent_for_same_values() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    rm.add_episode(episode(6, Closing::Terminal, &[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
    let before = rm.clone();
    rm.refresh_sample(StepRef { episode: 0, step: 3 }, 0.5, 1.0, 4.0).unwrap();
    assert_eq!(rm, before);
}

#[test]
fn refresh_updates_counter_and_prefix_targets() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    rm.add_episode(episode(8, Closing::Truncated, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0, -1.0]))
        .unwrap();
    let r = StepRef { episode: 0, step: 4 };
    rm.refresh_sample(r, 1.3, 6.0, 4.0).unwrap();
    assert_eq!(rm.n_far(), 1);
    rm.refresh_sample(r, 1.1, 1.5, 4.0).unwrap();
    assert_eq!(rm.n_far(), 0);
    rm.refresh_sample(StepRef { episode: 0, step: 1 }, -0.7, 0.3, 4.0).unwrap();
    let (rew, val, q, rhos, _) = rm.episode_caches(0).unwrap();
    let (v, qr) = vtbc_backward(rew, val, Some(q), rhos, 0.9, rm.reward_divisor());
    let (sv, sq) = rm.episode_targets(0).unwrap();
    for (a, b) in sv.iter().zip(&v) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
    for (a, b) in sq.iter().zip(&qr) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
    assert!(rm.refresh_sample(StepRef { episode: 0, step: 7 }, 0.0, 1.0, 4.0).is_err());
    assert!(rm.refresh_sample(StepRef { episode: 3, step: 0 }, 0.0, 1.0, 4.0).is_err());
}

#[test]
fn uniform_sampling() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    let mut r = rng::seeded(1);
    assert!(matches!(rm.sample_uniform(4, &mut r), Err(Error::NotWarmedUp { .. })));
    rm.add_episode(episode(2, Closing::Terminal, &[])).unwrap();
    let b = rm.sample_uniform(16, &mut r).unwrap();
    assert!(b.iter().all(|s| *s == StepRef { episode: 0, step: 0 }));

    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap();
    rm.add_episode(episode(7, Closing::Truncated, &[])).unwrap();
    let n = 100_000;
    let draws = rm.sample_uniform(n, &mut r).unwrap();
    let mut counts = std::collections::HashMap::new();
    for d in &draws {
        let len = if d.episode == 0 { 5 } else { 7 };
        assert!(d.step + 1 < len, "closing step sampled");
        *counts.entry(*d).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 10);
    let p = 0.1;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    for c in counts.values() {
        assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se);
    }
}

#[test]
fn warm_up_threshold() {
    let mut rm = ReplayMemory::new(cfg(100, 6), 1, 1);
    rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap();
    assert!(!rm.is_warm());
    assert!(rm.sample_uniform(1, &mut rng::seeded(0)).is_err());
    rm.add_episode(episode(2, Closing::Terminal, &[])).unwrap();
    assert!(rm.is_warm());
}

#[test]
fn rank_probabilities_two_items() {
    let p = RankIndex::rank_probabilities(0.7, 2);
    assert_abs_diff_eq!(p[0], 1.0 / (1.0 + 2f64.powf(-0.7)), epsilon = 1e-15);
    assert_abs_diff_eq!(p[0], 0.619, epsilon = 5e-4);
    assert_abs_diff_eq!(p[1], 0.381, epsilon = 5e-4);
}

#[test]
fn per_sampling_follows_ranks() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1).with_rank_per(PerConfig::default());
    rm.add_episode(episode(3, Closing::Terminal, &[])).unwrap();
    let low = StepRef { episode: 0, step: 0 };
    let high = StepRef { episode: 0, step: 1 };
    rm.update_priority(low, 0.1).unwrap();
    rm.update_priority(high, 5.0).unwrap();
    rm.mark_ranks_stale();
    let mut r = rng::seeded(9);
    let n = 100_000;
    let (refs, w) = rm.sample_rank_per(n, 1.0, &mut r).unwrap();
    let f_high = refs.iter().filter(|s| **s == high).count() as f64 / n as f64;
    let p = RankIndex::rank_probabilities(0.7, 2)[0];
    assert!((f_high - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    // the least likely sample gets weight one, the top-ranked sample less
    for (s, wi) in refs.iter().zip(&w) {
        if *s == low {
            assert_abs_diff_eq!(*wi, 1.0, epsilon = 1e-12);
        } else {
            assert_abs_diff_eq!(*wi, (1.0 - p) / p, epsilon = 1e-12);
        }
    }
}

#[test]
fn per_new_samples_get_max_priority_and_ties_are_uniform() {
    let mut rm = ReplayMemory::new(cfg(1000, 1), 1, 1).with_rank_per(PerConfig::default());
    rm.add_episode(episode(3, Closing::Terminal, &[])).unwrap();
    rm.update_priority(StepRef { episode: 0, step: 0 }, 7.0).unwrap();
    rm.add_episode(episode(3, Closing::Terminal, &[])).unwrap();
    assert_eq!(rm.priority(StepRef { episode: 1, step: 0 }).unwrap(), 7.0);
    assert_eq!(rm.priority(StepRef { episode: 1, step: 1 }).unwrap(), 7.0);

    // all-equal priorities: rank order is insertion order and the alpha=0 limit is uniform
    let mut rm = ReplayMemory::new(cfg(1000, 1), 1, 1)
        .with_rank_per(PerConfig { alpha: 0.0, beta0: 0.4 });
    rm.add_episode(episode(6, Closing::Terminal, &[])).unwrap();
    let mut r = rng::seeded(2);
    let n = 50_000;
    let (refs, w) = rm.sample_rank_per(n, 0.4, &mut r).unwrap();
    let order = rm.rank_per().unwrap().order().to_vec();
    assert_eq!(order, (0..5).map(|step| StepRef { episode: 0, step }).collect::<Vec<_>>());
    assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    for s in &order {
        let f = refs.iter().filter(|x| *x == s).count() as f64 / n as f64;
        assert!((f - 0.2).abs() < 3.0 * (0.16 / n as f64).sqrt());
    }
}

#[test]
fn per_beta_anneals() {
    let c = PerConfig::default();
    assert_eq!(c.beta_at(0.0), 0.4);
    assert_abs_diff_eq!(c.beta_at(0.5), 0.7, epsilon = 1e-15);
    assert_eq!(c.beta_at(2.0), 1.0);
}

#[test]
fn state_statistics() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    let mut e = episode(2, Closing::Terminal, &[]);
    e.steps[0].state = vec![1.0];
    e.steps[1].state = vec![3.0];
    rm.add_episode(e).unwrap();
    let (m, s) = rm.update_state_stats();
    assert_eq!((m[0], s[0]), (2.0, 1.0));
    assert_eq!(rm.standardize(&[3.0])[0], 1.0 / (1.0 + 1e-7));
    // frozen after the first computation
    rm.add_episode(episode(5, Closing::Terminal, &[])).unwrap();
    let (m, s) = rm.update_state_stats();
    assert_eq!((m[0], s[0]), (2.0, 1.0));

    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    let mut e = episode(3, Closing::Terminal, &[]);
    for s in &mut e.steps {
        s.state = vec![4.2];
    }
    rm.add_episode(e).unwrap();
    rm.update_state_stats();
    assert_eq!(rm.state_stats().1[0], 0.0);
    assert_eq!(rm.standardize(&[4.2])[0], 0.0);
}

#[test]
fn reward_scale() {
    let mut rm = ReplayMemory::new(cfg(100, 1), 1, 1);
    rm.add_episode(episode(3, Closing::Terminal, &[3.0, 4.0])).unwrap();
    assert_abs_diff_eq!(rm.update_reward_scale(), 12.5f64.sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(rm.scale_reward(3.0), 3.0 / (12.5f64.sqrt() + 1e-7), epsilon = 1e-15);
    assert_abs_diff_eq!(rm.scale_reward(3.0), 0.848528, epsilon = 1e-6);

    let mut z = ReplayMemory::new(cfg(100, 1), 1, 1);
    z.add_episode(episode(3, Closing::Terminal, &[0.0, 0.0])).unwrap();
    assert_eq!(z.update_reward_scale(), 0.0);
    assert_eq!(z.scale_reward(0.0), 0.0);

    let mut d = ReplayMemory::new(cfg(100, 1), 1, 1);
    d.add_episode(episode(3, Closing::Terminal, &[6.0, 8.0])).unwrap();
    assert_abs_diff_eq!(d.update_reward_scale(), 2.0 * rm.reward_scale(), epsilon = 1e-14);
}

#[test]
fn encode_round_trip() {
    let mut rm = ReplayMemory::new(cfg(20, 1), 1, 1).with_rank_per(PerConfig::default());
    for len in [5, 6, 7, 4] {
        rm.add_episode(episode(len, Closing::Truncated, &[0.5, 1.5])).unwrap();
    }
    rm.refresh_sample(StepRef { episode: 2, step: 1 }, 0.1, 9.0, 4.0).unwrap();
    rm.update_state_stats();
    rm.sample_rank_per(3, 0.5, &mut rng::seeded(1)).unwrap();
    let mut w = ByteWriter::new();
    rm.encode(&mut w);
    let back = ReplayMemory::decode(*rm.config(), &mut ByteReader::new(&w.buf)).unwrap();
    assert_eq!(back, rm);
}

#[derive(Debug, Clone)]
enum Op {
    Add(usize),
    Refresh(f64),
    Recount,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (2usize..8).prop_map(Op::Add),
        (0.01f64..20.0).prop_map(Op::Refresh),
        Just(Op::Recount),
    ]
}

proptest! {
    #[test]
    fn far_counter_matches_recount(ops in proptest::collection::vec(op(), 1..60)) {
        let c_max = 3.0;
        let mut rm = ReplayMemory::new(cfg(25, 1), 1, 1);
        let mut r = rng::seeded(0);
        for o in ops {
            match o {
                Op::Add(len) => {
                    rm.add_episode(episode(len, Closing::Truncated, &[])).unwrap();
                }
                Op::Refresh(rho) if rm.n_samples() > 0 => {
                    let s = rm.sample_uniform(1, &mut r).unwrap()[0];
                    rm.refresh_sample(s, 0.2, rho, c_max).unwrap();
                }
                Op::Refresh(_) => {}
                Op::Recount => {
                    rm.recount_far(c_max);
                }
            }
            prop_assert_eq!(rm.n_far(), recount(&rm, c_max));
            prop_assert!(rm.n_far() <= rm.n_samples());
        }
    }

    #[test]
    fn fifo_order_preserved(lens in proptest::collection::vec(2usize..9, 1..40)) {
        let mut rm = ReplayMemory::new(cfg(30, 1), 1, 1);
        let mut newest_len = 0;
        for len in lens {
            rm.add_episode(episode(len, Closing::Terminal, &[])).unwrap();
            newest_len = len;
            let ids: Vec<u64> = rm.episode_ids().collect();
            prop_assert!(ids.windows(2).all(|w| w[1] == w[0] + 1));
            prop_assert!(rm.n_obs() <= 30 + newest_len);
        }
        let _ = newest_len;
    }

    #[test]
    fn beta_stays_in_unit_interval(
        steps in proptest::collection::vec((0usize..100, 0.0f64..0.5), 1..300),
        beta0 in 0.0f64..=1.0,
    ) {
        let mut b = beta0;
        for (far, eta) in steps {
            b = update_beta(b, far, 100, 0.1, eta);
            prop_assert!((0.0..=1.0).contains(&b));
        }
    }
}

/// Far fraction that grows while beta is high (weak penalty) and shrinks while it is low.
#[test]
fn closed_loop_regulates_far_fraction() {
    let d = 0.1;
    let eta = 1e-3;
    let mut beta = 1.0;
    let mut frac: f64 = 0.0;
    let mut tail = Vec::new();
    for k in 0..200_000 {
        let n_far = (frac * 10_000.0).round() as usize;
        beta = update_beta(beta, n_far, 10_000, d, eta);
        // relaxes toward beta-dependent equilibrium: no penalty -> 40% far, full penalty -> 0%
        frac += 0.01 * (0.4 * beta - frac);
        if k >= 100_000 {
            tail.push(frac);
        }
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((mean - d).abs() < 0.05, "mean far fraction {mean}");
    assert!(tail.iter().all(|f| (f - d).abs() < 0.05));
}
