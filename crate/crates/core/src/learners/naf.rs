//! NAF: one network producing `V`, the mean action `m` and a lower-triangular `L`, with
//! `Q(s, a) = V - (a - m)^T L L^T (a - m)` trained toward a target-network Q-learning target.
//!
//! Outputs are `[V, m_1..m_d, L packed row-major]`, the diagonal of `L` through softplus.

use ndarray::Array2;

use super::advantage::{lower_triangular, lt_times, tri_index, tri_len};
use super::ddpg::soft_update;
use super::{check_finite, stack, sum_in_order, Sample, SampleStats, StepContext};
use crate::error::Result;
use crate::nncore::{sigmoid, MlpParams};
use crate::par::{self, CHUNK_ROWS};
use crate::policy::{importance_weight, kl_divergence, GaussianPolicy};
use crate::rng::Rng;

/// `V - (a - m)^T L L^T (a - m)`.
pub fn naf_q(value: f64, mean: &[f64], l: &[Vec<f64>], action: &[f64]) -> f64 {
    let u: Vec<f64> = action.iter().zip(mean).map(|(a, m)| a - m).collect();
    value - lt_times(l, &u).iter().map(|y| y * y).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NafNet {
    pub mlp: MlpParams,
    pub target: MlpParams,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NafHead {
    pub value: f64,
    pub mean: Vec<f64>,
    pub l: Vec<Vec<f64>>,
}

impl NafHead {
    pub fn q(&self, action: &[f64]) -> f64 {
        naf_q(self.value, &self.mean, &self.l, action)
    }
}

impl NafNet {
    pub fn layer_sizes(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1 + action_dim + tri_len(action_dim));
        sizes
    }

    pub fn new(state_dim: usize, action_dim: usize, hidden: &[usize], sigma: f64, rng: &mut Rng) -> Result<Self> {
        let mlp = MlpParams::init(&Self::layer_sizes(state_dim, action_dim, hidden), rng)?;
        Ok(Self {
            target: mlp.clone(),
            mlp,
            sigma,
        })
    }

    pub fn action_dim(&self) -> usize {
        let k = self.mlp.output_size() - 1;
        // k = d + d (d + 1) / 2
        let mut d = 0;
        while d + tri_len(d) < k {
            d += 1;
        }
        d
    }

    fn head_from_row(row: &[f64], d: usize) -> NafHead {
        NafHead {
            value: row[0],
            mean: row[1..1 + d].to_vec(),
            l: lower_triangular(&row[1 + d..], d),
        }
    }

    pub fn head(&self, state: &[f64]) -> Result<NafHead> {
        Ok(Self::head_from_row(&self.mlp.predict(state)?, self.action_dim()))
    }

    pub fn policy(&self, state: &[f64]) -> Result<GaussianPolicy> {
        GaussianPolicy::isotropic(self.head(state)?.mean, self.sigma)
    }

    pub fn soft_update_target(&mut self, alpha: f64) -> Result<()> {
        soft_update(&mut self.target.values, &self.mlp.values, alpha)
    }
}

/// Batch-mean gradient of `(Q(s, a) - q)^2 / 2`, `q = r + gamma V'(s')`, for near-policy
/// samples, combined with the penalty on the mean output.
pub fn batch_gradient(net: &NafNet, samples: &[Sample], ctx: &StepContext) -> Result<(Vec<f64>, Vec<SampleStats>)> {
    let b = samples.len();
    let d = net.action_dim();
    let ds = net.mlp.input_size();
    let inv_b = if b == 0 { 0.0 } else { 1.0 / b as f64 };
    let tw = ctx.task_weight();
    let pw = ctx.penalty_weight();
    let var = net.sigma * net.sigma;

    let parts = par::map_chunks(ctx.exec, b, CHUNK_ROWS, |range| -> Result<_> {
        let rows = &samples[range];
        let s = stack(rows.iter().map(|x| x.state.as_slice()), ds);
        let s1 = stack(rows.iter().map(|x| x.next_state.as_slice()), ds);
        let tape = net.mlp.forward_batch(s.view())?;
        let v1 = net.target.forward_batch(s1.view())?;
        let out = tape.output();
        let mut og = Array2::<f64>::zeros(out.dim());
        let mut stats = Vec::with_capacity(rows.len());
        for (r, x) in rows.iter().enumerate() {
            let row = out.row(r);
            let row = row.as_slice().expect("contiguous row");
            let head = NafNet::head_from_row(row, d);
            let pi = GaussianPolicy {
                mean: head.mean.clone(),
                stddev: vec![net.sigma; d],
            };
            let rho = ctx.capped(importance_weight(&pi, &x.behavior, &x.action));
            let near = ctx.keeps(rho);
            let q = head.q(&x.action);
            let boot = if x.next_terminal { 0.0 } else { v1.output()[[r, 0]] };
            let target = x.reward + ctx.gamma * boot;
            let w = x.weight * inv_b;
            let u: Vec<f64> = x.action.iter().zip(&head.mean).map(|(a, m)| a - m).collect();
            let y = lt_times(&head.l, &u);
            let delta = if near { q - target } else { 0.0 };
            og[[r, 0]] = w * tw * delta;
            for i in 0..d {
                // dQ/dm_i = 2 (L y)_i
                let ly: f64 = (0..=i).map(|k| head.l[i][k] * y[k]).sum();
                let kl = (head.mean[i] - x.behavior.mean[i]) / var;
                og[[r, 1 + i]] = w * (tw * delta * 2.0 * ly + pw * kl);
                for k in 0..=i {
                    let idx = tri_index(i, k);
                    let mut g = -2.0 * y[k] * u[i];
                    if i == k {
                        g *= sigmoid(row[1 + d + idx]);
                    }
                    og[[r, 1 + d + idx]] = w * tw * delta * g;
                }
            }
            stats.push(SampleStats {
                rho,
                near,
                value: head.value,
                q_value: q,
                td_error: target - q,
                kl: kl_divergence(&x.behavior, &pi),
            });
        }
        let mut g = vec![0.0; net.mlp.len()];
        net.mlp.backward_batch(&tape, og.view(), Some(&mut g))?;
        Ok((g, stats))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let grads: Vec<Vec<f64>> = parts.iter().map(|p| p.0.clone()).collect();
    let grad = sum_in_order(net.mlp.len(), &grads);
    check_finite("naf", &grad)?;
    Ok((grad, parts.into_iter().flat_map(|p| p.1).collect()))
}
