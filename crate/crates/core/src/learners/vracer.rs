//! V-RACER: one network for the state value and the policy mean, a state-independent
//! standard deviation, off-policy policy gradient and clipped-trace value targets.
//!
//! Network outputs are `[V, m_1..m_d, adv_1..adv_k]`; the standard deviation is
//! `softplus(sigma_raw)` with `sigma_raw` a separate parameter vector shared by all states.
//! The flat parameter vector is the MLP parameters followed by `sigma_raw`.

use ndarray::Array2;

use super::advantage::AdvKind;
use super::{check_finite, stack, sum_in_order, Sample, SampleStats, StepContext};
use crate::error::{Error, Result};
use crate::nncore::{sigmoid, softplus, softplus_inverse, MlpParams};
use crate::par::{self, CHUNK_ROWS};
use crate::policy::{
    importance_weight, kl_divergence, kl_gradient, logprob_gradient, GaussianPolicy,
};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct VracerNet {
    pub mlp: MlpParams,
    pub sigma_raw: Vec<f64>,
    pub adv: AdvKind,
}

/// Evaluated network outputs for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct VracerHead {
    pub value: f64,
    pub policy: GaussianPolicy,
    pub adv_raw: Vec<f64>,
}

impl VracerHead {
    /// `Q(s, a) = V(s) + A(s, a)`, or `V(s)` without an advantage head.
    pub fn q_value(&self, kind: AdvKind, action: &[f64]) -> f64 {
        let u: Vec<f64> = action.iter().zip(&self.policy.mean).map(|(a, m)| a - m).collect();
        let var: Vec<f64> = self.policy.stddev.iter().map(|s| s * s).collect();
        self.value + kind.evaluate(&self.adv_raw, &u, &var).map_or(0.0, |(a, _)| a)
    }
}

impl VracerNet {
    pub fn layer_sizes(state_dim: usize, action_dim: usize, hidden: &[usize], adv: AdvKind) -> Vec<usize> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1 + action_dim + adv.n_outputs(action_dim));
        sizes
    }

    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        adv: AdvKind,
        sigma0: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if !(sigma0 > 0.0) {
            return Err(Error::Config(format!("initial sigma must be positive, got {sigma0}")));
        }
        let mlp = MlpParams::init(&Self::layer_sizes(state_dim, action_dim, hidden, adv), rng)?;
        Ok(Self {
            mlp,
            sigma_raw: vec![softplus_inverse(sigma0); action_dim],
            adv,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.sigma_raw.len()
    }

    pub fn n_params(&self) -> usize {
        self.mlp.len() + self.sigma_raw.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mlp.values.clone();
        p.extend_from_slice(&self.sigma_raw);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Dimension {
                what: "vracer parameters",
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let n = self.mlp.len();
        self.mlp.values.copy_from_slice(&p[..n]);
        self.sigma_raw.copy_from_slice(&p[n..]);
        Ok(())
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.sigma_raw.iter().map(|&x| softplus(x)).collect()
    }

    fn head_from_row(&self, row: &[f64], sigma: &[f64]) -> VracerHead {
        let d = self.action_dim();
        VracerHead {
            value: row[0],
            policy: GaussianPolicy {
                mean: row[1..1 + d].to_vec(),
                stddev: sigma.to_vec(),
            },
            adv_raw: row[1 + d..].to_vec(),
        }
    }

    pub fn head(&self, state: &[f64]) -> Result<VracerHead> {
        let out = self.mlp.predict(state)?;
        Ok(self.head_from_row(&out, &self.sigma()))
    }
}

#[derive(Debug, Clone)]
pub struct VracerGrad {
    /// Loss gradient over the flat parameter vector.
    pub grad: Vec<f64>,
    pub stats: Vec<SampleStats>,
}

/// Batch-mean gradient of the penalized V-RACER loss.
///
/// Per sample, with fresh `rho`, `V`, `Q = V + A` and the stored return target `Qret`:
/// the policy loss is `-rho (Qret - V) ln pi(a)`, the value loss has gradient
/// `(V - Vtbc) dV` with `Vtbc = V + min(1, rho) (Qret - Q)` held fixed, and with an advantage
/// head the loss `rho (A + V - Qret)^2 / 2` is added for the advantage outputs and `V`
/// (policy statistics inside `A` held fixed).
pub fn batch_gradient(net: &VracerNet, samples: &[Sample], ctx: &StepContext) -> Result<VracerGrad> {
    let b = samples.len();
    if b == 0 {
        return Ok(VracerGrad {
            grad: vec![0.0; net.n_params()],
            stats: Vec::new(),
        });
    }
    let d = net.action_dim();
    let ds = net.mlp.input_size();
    let sigma = net.sigma();
    let var: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let dsig_draw: Vec<f64> = net.sigma_raw.iter().map(|&x| sigmoid(x)).collect();
    let inv_b = 1.0 / b as f64;
    let tw = ctx.task_weight();
    let pw = ctx.penalty_weight();

    let parts = par::map_chunks(ctx.exec, b, CHUNK_ROWS, |range| -> Result<_> {
        let rows = &samples[range];
        let x = stack(rows.iter().map(|s| s.state.as_slice()), ds);
        let tape = net.mlp.forward_batch(x.view())?;
        let out = tape.output();
        let mut og = Array2::<f64>::zeros(out.dim());
        let mut g = vec![0.0; net.n_params()];
        let n_mlp = net.mlp.len();
        let mut stats = Vec::with_capacity(rows.len());
        for (r, s) in rows.iter().enumerate() {
            let row = out.row(r);
            let row = row.as_slice().expect("contiguous row");
            let head = net.head_from_row(row, &sigma);
            let pi = &head.policy;
            let rho = ctx.capped(importance_weight(pi, &s.behavior, &s.action));
            let near = ctx.keeps(rho);
            let u: Vec<f64> = s.action.iter().zip(&pi.mean).map(|(a, m)| a - m).collect();
            let adv = net.adv.evaluate(&head.adv_raw, &u, &var);
            let q = head.value + adv.as_ref().map_or(0.0, |(a, _)| *a);
            let w = s.weight * inv_b;
            let klg = kl_gradient(&s.behavior, pi);
            let mut dv = 0.0;
            let mut dm = vec![0.0; d];
            let mut dsig = vec![0.0; d];
            if near {
                let a_hat = s.qret - head.value;
                let score = logprob_gradient(pi, &s.action);
                dv += -rho.min(1.0) * (s.qret - q);
                for i in 0..d {
                    dm[i] += -rho * a_hat * score.mean[i];
                    dsig[i] += -rho * a_hat * score.stddev[i];
                }
                if let Some((a, da)) = &adv {
                    let delta = a + head.value - s.qret;
                    dv += rho * delta;
                    for (j, dj) in da.iter().enumerate() {
                        og[[r, 1 + d + j]] = w * tw * rho * delta * dj;
                    }
                }
            }
            og[[r, 0]] = w * tw * dv;
            for i in 0..d {
                og[[r, 1 + i]] = w * (tw * dm[i] + pw * klg.mean[i]);
                g[n_mlp + i] += w * (tw * dsig[i] + pw * klg.stddev[i]) * dsig_draw[i];
            }
            stats.push(SampleStats {
                rho,
                near,
                value: head.value,
                q_value: q,
                td_error: s.qret - q,
                kl: kl_divergence(&s.behavior, pi),
            });
        }
        net.mlp.backward_batch(&tape, og.view(), Some(&mut g[..n_mlp]))?;
        Ok((g, stats))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let grads: Vec<Vec<f64>> = parts.iter().map(|(g, _)| g.clone()).collect();
    let grad = sum_in_order(net.n_params(), &grads);
    check_finite("vracer", &grad)?;
    let stats = parts.into_iter().flat_map(|(_, s)| s).collect();
    Ok(VracerGrad { grad, stats })
}
