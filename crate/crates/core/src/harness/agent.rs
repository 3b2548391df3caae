//! The learner: networks of one algorithm, their optimizer state, acting and updates.

use crate::error::{Error, Result};
use crate::harness::config::{Algo, TrainConfig};
use crate::learners::{ddpg, naf, vracer, Sample, SampleStats, StepContext};
use crate::nncore::MlpParams;
use crate::optim::AdamState;
use crate::policy::GaussianPolicy;
use crate::replay::NORMALIZATION_EPS;
use crate::rng::Rng;

/// Frozen state standardization; the identity until statistics exist.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StateScaler {
    pub fn apply(&self, s: &[f64]) -> Vec<f64> {
        if self.mean.is_empty() {
            return s.to_vec();
        }
        s.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, sd))| (x - m) / (sd + NORMALIZATION_EPS))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Vracer {
        net: vracer::VracerNet,
        adam: AdamState,
    },
    Ddpg {
        nets: ddpg::DdpgNets,
        critic_adam: AdamState,
        actor_adam: AdamState,
    },
    Naf {
        net: naf::NafNet,
        adam: AdamState,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub learner: Learner,
    target_rate: f64,
    weight_decay: f64,
    /// Actor learning rate relative to the main one (DDPG).
    actor_ratio: f64,
}

impl Agent {
    pub fn new(cfg: &TrainConfig, state_dim: usize, action_dim: usize, rng: &mut Rng) -> Result<Self> {
        let learner = match cfg.algo {
            Algo::Vracer => {
                let net = vracer::VracerNet::new(state_dim, action_dim, &cfg.hidden, cfg.adv, cfg.sigma, rng)?;
                Learner::Vracer {
                    adam: AdamState::new(net.n_params()),
                    net,
                }
            }
            Algo::Ddpg => {
                let nets = ddpg::DdpgNets::new(state_dim, action_dim, &cfg.hidden, cfg.sigma, rng)?;
                Learner::Ddpg {
                    critic_adam: AdamState::new(nets.critic.len()),
                    actor_adam: AdamState::new(nets.actor.len()),
                    nets,
                }
            }
            Algo::Naf => {
                let net = naf::NafNet::new(state_dim, action_dim, &cfg.hidden, cfg.sigma, rng)?;
                Learner::Naf {
                    adam: AdamState::new(net.mlp.len()),
                    net,
                }
            }
        };
        Ok(Self {
            learner,
            target_rate: cfg.target_rate,
            weight_decay: cfg.weight_decay,
            actor_ratio: cfg.actor_eta / cfg.eta,
        })
    }

    pub fn algo(&self) -> Algo {
        match self.learner {
            Learner::Vracer { .. } => Algo::Vracer,
            Learner::Ddpg { .. } => Algo::Ddpg,
            Learner::Naf { .. } => Algo::Naf,
        }
    }

    /// Gaussian policy at a standardized state.
    pub fn policy(&self, s: &[f64]) -> Result<GaussianPolicy> {
        match &self.learner {
            Learner::Vracer { net, .. } => Ok(net.head(s)?.policy),
            Learner::Ddpg { nets, .. } => nets.policy(s),
            Learner::Naf { net, .. } => net.policy(s),
        }
    }

    pub fn mean_action(&self, s: &[f64]) -> Result<Vec<f64>> {
        Ok(self.policy(s)?.mean)
    }

    /// State value estimate stored with each observation.
    pub fn value(&self, s: &[f64]) -> Result<f64> {
        match &self.learner {
            Learner::Vracer { net, .. } => Ok(net.head(s)?.value),
            Learner::Ddpg { nets, .. } => nets.value(s),
            Learner::Naf { net, .. } => Ok(net.head(s)?.value),
        }
    }

    /// Policy and value in one forward pass where the network shares them.
    pub fn act_info(&self, s: &[f64]) -> Result<(GaussianPolicy, f64)> {
        match &self.learner {
            Learner::Vracer { net, .. } => {
                let h = net.head(s)?;
                Ok((h.policy, h.value))
            }
            Learner::Ddpg { nets, .. } => {
                let p = nets.policy(s)?;
                let v = nets.q_value(s, &p.mean)?;
                Ok((p, v))
            }
            Learner::Naf { net, .. } => {
                let h = net.head(s)?;
                Ok((GaussianPolicy::isotropic(h.mean, net.sigma)?, h.value))
            }
        }
    }

    /// One optimizer step on a batch; returns the per-sample statistics computed with the
    /// parameters before the step.
    pub fn update(&mut self, samples: &[Sample], ctx: &StepContext, eta: f64) -> Result<Vec<SampleStats>> {
        match &mut self.learner {
            Learner::Vracer { net, adam } => {
                let g = vracer::batch_gradient(net, samples, ctx)?;
                let mut p = net.params();
                adam.step(&mut p, &g.grad, eta)?;
                net.set_params(&p)?;
                Ok(g.stats)
            }
            Learner::Ddpg {
                nets,
                critic_adam,
                actor_adam,
            } => {
                let g = ddpg::batch_gradients(nets, samples, ctx, self.weight_decay)?;
                critic_adam.step(&mut nets.critic.values, &g.critic, eta)?;
                actor_adam.step(&mut nets.actor.values, &g.actor, eta * self.actor_ratio)?;
                nets.soft_update_targets(self.target_rate)?;
                Ok(g.stats)
            }
            Learner::Naf { net, adam } => {
                let (g, stats) = naf::batch_gradient(net, samples, ctx)?;
                adam.step(&mut net.mlp.values, &g, eta)?;
                net.soft_update_target(self.target_rate)?;
                Ok(stats)
            }
        }
    }

    /// Named parameter and optimizer vectors, in checkpoint order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        match &self.learner {
            Learner::Vracer { net, adam } => vec![
                ("mlp", net.mlp.values.as_slice()),
                ("sigma_raw", net.sigma_raw.as_slice()),
                ("adam.m", adam.m.as_slice()),
                ("adam.v", adam.v.as_slice()),
            ],
            Learner::Ddpg {
                nets,
                critic_adam,
                actor_adam,
            } => vec![
                ("actor", nets.actor.values.as_slice()),
                ("critic", nets.critic.values.as_slice()),
                ("actor_target", nets.actor_target.values.as_slice()),
                ("critic_target", nets.critic_target.values.as_slice()),
                ("actor_adam.m", actor_adam.m.as_slice()),
                ("actor_adam.v", actor_adam.v.as_slice()),
                ("critic_adam.m", critic_adam.m.as_slice()),
                ("critic_adam.v", critic_adam.v.as_slice()),
            ],
            Learner::Naf { net, adam } => vec![
                ("mlp", net.mlp.values.as_slice()),
                ("target", net.target.values.as_slice()),
                ("adam.m", adam.m.as_slice()),
                ("adam.v", adam.v.as_slice()),
            ],
        }
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        match &mut self.learner {
            Learner::Vracer { net, adam } => vec![
                ("mlp", &mut net.mlp.values),
                ("sigma_raw", &mut net.sigma_raw),
                ("adam.m", &mut adam.m),
                ("adam.v", &mut adam.v),
            ],
            Learner::Ddpg {
                nets,
                critic_adam,
                actor_adam,
            } => vec![
                ("actor", &mut nets.actor.values),
                ("critic", &mut nets.critic.values),
                ("actor_target", &mut nets.actor_target.values),
                ("critic_target", &mut nets.critic_target.values),
                ("actor_adam.m", &mut actor_adam.m),
                ("actor_adam.v", &mut actor_adam.v),
                ("critic_adam.m", &mut critic_adam.m),
                ("critic_adam.v", &mut critic_adam.v),
            ],
            Learner::Naf { net, adam } => vec![
                ("mlp", &mut net.mlp.values),
                ("target", &mut net.target.values),
                ("adam.m", &mut adam.m),
                ("adam.v", &mut adam.v),
            ],
        }
    }

    /// Overwrite every tensor; names and lengths must match [`Self::tensors`].
    pub fn set_tensors(&mut self, tensors: &[(String, Vec<f64>)]) -> Result<()> {
        let mut slots = self.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                slots.len(),
                tensors.len()
            )));
        }
        for ((name, slot), (got, values)) in slots.iter_mut().zip(tensors) {
            if name != got || slot.len() != values.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {got} ({} values) does not fit {name} ({} values)",
                    values.len(),
                    slot.len()
                )));
            }
            slot.copy_from_slice(values);
        }
        Ok(())
    }

    pub fn adam_steps(&self) -> Vec<u64> {
        match &self.learner {
            Learner::Vracer { adam, .. } | Learner::Naf { adam, .. } => vec![adam.step_count],
            Learner::Ddpg {
                critic_adam,
                actor_adam,
                ..
            } => vec![actor_adam.step_count, critic_adam.step_count],
        }
    }

    pub fn set_adam_steps(&mut self, steps: &[u64]) -> Result<()> {
        let bad = || Error::Checkpoint(format!("unexpected optimizer step counts {steps:?}"));
        match &mut self.learner {
            Learner::Vracer { adam, .. } | Learner::Naf { adam, .. } => {
                adam.step_count = *steps.first().filter(|_| steps.len() == 1).ok_or_else(bad)?;
            }
            Learner::Ddpg {
                critic_adam,
                actor_adam,
                ..
            } => {
                if steps.len() != 2 {
                    return Err(bad());
                }
                actor_adam.step_count = steps[0];
                critic_adam.step_count = steps[1];
            }
        }
        Ok(())
    }

    /// Parameter count of the trained networks, optimizer state and target copies excluded.
    pub fn n_params(&self) -> usize {
        match &self.learner {
            Learner::Vracer { net, .. } => net.n_params(),
            Learner::Ddpg { nets, .. } => nets.actor.len() + nets.critic.len(),
            Learner::Naf { net, .. } => net.mlp.len(),
        }
    }

    pub fn networks(&self) -> Vec<(&'static str, &MlpParams)> {
        match &self.learner {
            Learner::Vracer { net, .. } => vec![("net", &net.mlp)],
            Learner::Ddpg { nets, .. } => vec![("actor", &nets.actor), ("critic", &nets.critic)],
            Learner::Naf { net, .. } => vec![("net", &net.mlp)],
        }
    }
}
