use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use refer::learners::advantage::AdvKind;
use refer::learners::ddpg::{self, DdpgNets};
use refer::learners::vracer::{self, VracerNet};
use refer::learners::{ReplayMode, Sample, StepContext};
use refer::par::Execution;
use refer::policy::GaussianPolicy;
use refer::rng;

fn batch(n: usize, ds: usize, da: usize) -> Vec<Sample> {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let mut g = || -> f64 { r.sample(StandardNormal) };
    (0..n)
        .map(|_| {
            let mean: Vec<f64> = (0..da).map(|_| 0.1 * g()).collect();
            let action = mean.iter().map(|m| m + 0.1 * g()).collect();
            Sample {
                state: (0..ds).map(|_| g()).collect(),
                action,
                behavior: GaussianPolicy::isotropic(mean, 0.2).unwrap(),
                reward: g(),
                next_state: (0..ds).map(|_| g()).collect(),
                next_terminal: false,
                qret: g(),
                weight: 1.0,
            }
        })
        .collect()
}

fn ctx(exec: Execution) -> StepContext {
    StepContext {
        c_max: 4.0,
        beta: 0.9,
        gamma: 0.995,
        rules: ReplayMode::Refer.rules(),
        exec,
    }
}

fn bench(c: &mut Criterion) {
    let vr = VracerNet::new(3, 1, &[128, 128], AdvKind::None, 0.2, &mut rng::seeded(1)).unwrap();
    let dd = DdpgNets::new(3, 1, &[128, 128], 0.2, &mut rng::seeded(1)).unwrap();
    let samples = batch(256, 3, 1);
    let mut group = c.benchmark_group("batch_gradient");
    for exec in [Execution::Sequential, Execution::Parallel] {
        let name = format!("{exec:?}").to_lowercase();
        group.bench_with_input(BenchmarkId::new("vracer_b256", &name), &exec, |b, &e| {
            b.iter(|| vracer::batch_gradient(&vr, &samples, &ctx(e)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ddpg_b128", &name), &exec, |b, &e| {
            b.iter(|| ddpg::batch_gradients(&dd, &samples[..128], &ctx(e), 1e-4).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
