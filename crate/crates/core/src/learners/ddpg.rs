//! DDPG: a tanh-bounded deterministic actor, a critic `Q(s, a)` on the concatenated input,
//! and slowly tracking target copies of both.

use ndarray::Array2;

use super::{check_finite, stack, sum_in_order, Sample, SampleStats, StepContext};
use crate::error::{Error, Result};
use crate::nncore::MlpParams;
use crate::optim::add_weight_decay;
use crate::par::{self, CHUNK_ROWS};
use crate::policy::{importance_weight, kl_divergence, GaussianPolicy};
use crate::rng::Rng;

pub const TARGET_RATE: f64 = 0.01;
pub const CRITIC_WEIGHT_DECAY: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgNets {
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub actor_target: MlpParams,
    pub critic_target: MlpParams,
    /// Standard deviation of the Gaussian policy built around the actor's output.
    pub sigma: f64,
}

/// `target <- (1 - alpha) target + alpha source`.
pub fn soft_update(target: &mut [f64], source: &[f64], alpha: f64) -> Result<()> {
    if target.len() != source.len() {
        return Err(Error::Dimension {
            what: "soft update",
            expected: target.len(),
            got: source.len(),
        });
    }
    for (t, s) in target.iter_mut().zip(source) {
        *t = (1.0 - alpha) * *t + alpha * s;
    }
    Ok(())
}

impl DdpgNets {
    pub fn new(state_dim: usize, action_dim: usize, hidden: &[usize], sigma: f64, rng: &mut Rng) -> Result<Self> {
        let mut a = vec![state_dim];
        a.extend_from_slice(hidden);
        a.push(action_dim);
        let mut c = vec![state_dim + action_dim];
        c.extend_from_slice(hidden);
        c.push(1);
        let actor = MlpParams::init(&a, rng)?;
        let critic = MlpParams::init(&c, rng)?;
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            sigma,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_size()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_size()
    }

    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor.predict(state)?.into_iter().map(f64::tanh).collect())
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        Ok(self.critic.predict(&x)?[0])
    }

    /// `Q(s, m(s))`, the bootstrap value of a truncated episode.
    pub fn value(&self, state: &[f64]) -> Result<f64> {
        let m = self.mean_action(state)?;
        self.q_value(state, &m)
    }

    pub fn policy(&self, state: &[f64]) -> Result<GaussianPolicy> {
        GaussianPolicy::isotropic(self.mean_action(state)?, self.sigma)
    }

    pub fn soft_update_targets(&mut self, alpha: f64) -> Result<()> {
        soft_update(&mut self.actor_target.values, &self.actor.values, alpha)?;
        soft_update(&mut self.critic_target.values, &self.critic.values, alpha)
    }
}

#[derive(Debug, Clone)]
pub struct DdpgGrad {
    pub critic: Vec<f64>,
    pub actor: Vec<f64>,
    pub stats: Vec<SampleStats>,
}

fn concat_rows(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("row counts")
}

/// Batch-mean critic and actor loss gradients.
///
/// Critic: `(Q(s, a) - q) dQ` with `q = r + gamma Q'(s', m'(s'))` from the target networks,
/// kept only for near-policy samples, plus L2 decay on the critic weights. Actor: the
/// deterministic policy gradient `-dQ/da(s, m(s)) dm`, combined with the penalty
/// `dD_KL(mu || pi)/dm`. Only the actor is weighted by `beta`.
pub fn batch_gradients(
    nets: &DdpgNets,
    samples: &[Sample],
    ctx: &StepContext,
    weight_decay: f64,
) -> Result<DdpgGrad> {
    let b = samples.len();
    let ds = nets.state_dim();
    let da = nets.action_dim();
    let tw = ctx.task_weight();
    let pw = ctx.penalty_weight();
    let inv_b = if b == 0 { 0.0 } else { 1.0 / b as f64 };
    let var = nets.sigma * nets.sigma;

    let parts = par::map_chunks(ctx.exec, b, CHUNK_ROWS, |range| -> Result<_> {
        let rows = &samples[range];
        let n = rows.len();
        let s = stack(rows.iter().map(|x| x.state.as_slice()), ds);
        let s1 = stack(rows.iter().map(|x| x.next_state.as_slice()), ds);
        let a = stack(rows.iter().map(|x| x.action.as_slice()), da);

        let actor_tape = nets.actor.forward_batch(s.view())?;
        let m = actor_tape.output().mapv(f64::tanh);
        let m1 = nets.actor_target.forward_batch(s1.view())?.output().mapv(f64::tanh);
        let q1 = nets.critic_target.forward_batch(concat_rows(&s1, &m1).view())?;
        let q_tape = nets.critic.forward_batch(concat_rows(&s, &a).view())?;
        let qm_tape = nets.critic.forward_batch(concat_rows(&s, &m).view())?;
        let ones = Array2::<f64>::ones((n, 1));
        let dq_dx = nets.critic.backward_batch(&qm_tape, ones.view(), None)?;

        let mut og_q = Array2::<f64>::zeros((n, 1));
        let mut og_a = Array2::<f64>::zeros((n, da));
        let mut stats = Vec::with_capacity(n);
        for (r, x) in rows.iter().enumerate() {
            let mean: Vec<f64> = m.row(r).to_vec();
            let pi = GaussianPolicy {
                mean,
                stddev: vec![nets.sigma; da],
            };
            let rho = ctx.capped(importance_weight(&pi, &x.behavior, &x.action));
            let near = ctx.keeps(rho);
            let q = q_tape.output()[[r, 0]];
            let boot = if x.next_terminal { 0.0 } else { q1.output()[[r, 0]] };
            let target = x.reward + ctx.gamma * boot;
            let w = x.weight * inv_b;
            if near {
                og_q[[r, 0]] = w * (q - target);
            }
            for i in 0..da {
                let task = if near { -dq_dx[[r, ds + i]] } else { 0.0 };
                let kl = (pi.mean[i] - x.behavior.mean[i]) / var;
                let dm = w * (tw * task + pw * kl);
                og_a[[r, i]] = dm * (1.0 - pi.mean[i] * pi.mean[i]);
            }
            stats.push(SampleStats {
                rho,
                near,
                value: q,
                q_value: q,
                td_error: target - q,
                kl: kl_divergence(&x.behavior, &pi),
            });
        }
        let mut gc = vec![0.0; nets.critic.len()];
        nets.critic.backward_batch(&q_tape, og_q.view(), Some(&mut gc))?;
        let mut ga = vec![0.0; nets.actor.len()];
        nets.actor.backward_batch(&actor_tape, og_a.view(), Some(&mut ga))?;
        Ok((gc, ga, stats))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let gcs: Vec<Vec<f64>> = parts.iter().map(|p| p.0.clone()).collect();
    let gas: Vec<Vec<f64>> = parts.iter().map(|p| p.1.clone()).collect();
    let mut critic = sum_in_order(nets.critic.len(), &gcs);
    let actor = sum_in_order(nets.actor.len(), &gas);
    let weights = (0..nets.critic.n_layers()).map(|l| nets.critic.layer_range(l).0);
    add_weight_decay(&mut critic, &nets.critic.values, weight_decay, weights);
    check_finite("ddpg critic", &critic)?;
    check_finite("ddpg actor", &actor)?;
    let stats = parts.into_iter().flat_map(|p| p.2).collect();
    Ok(DdpgGrad { critic, actor, stats })
}
