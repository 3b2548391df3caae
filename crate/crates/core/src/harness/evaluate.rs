//! Deterministic evaluation: the policy mean acts, rewards are reported unscaled.

use crate::envs::{action_rescale, Env, EnvId, Status};
use crate::error::{Error, Result};
use crate::harness::agent::{Agent, StateScaler};
use crate::harness::checkpoint::Checkpoint;
use crate::rng::{self, Stream};

/// Raw return of one episode from the environment's current state.
pub fn rollout(agent: &Agent, scaler: &StateScaler, env: &mut Env) -> Result<f64> {
    let spec = env.spec();
    let mut obs = env.observe();
    let mut total = 0.0;
    loop {
        let a = agent.mean_action(&scaler.apply(&obs))?;
        let (next, r, status) = env.step(&action_rescale(&spec, &a));
        total += r;
        obs = next;
        if status != Status::Running {
            return Ok(total);
        }
    }
}

/// Per-episode raw returns; initial states come from the evaluation stream of `seed`.
pub fn evaluate_agent(
    agent: &Agent,
    scaler: &StateScaler,
    env: EnvId,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::Evaluation("at least one episode is required".into()));
    }
    let mut rng = rng::stream(seed, Stream::Evaluation);
    let mut e = env.make();
    (0..episodes)
        .map(|_| {
            e.reset(&mut rng);
            rollout(agent, scaler, &mut e)
        })
        .collect()
}

/// Evaluate a checkpoint on `env`, which must be the environment it was trained on.
/// Returns the mean and the per-episode returns.
pub fn evaluate(ckpt: &Checkpoint, env: EnvId, episodes: usize, seed: u64) -> Result<(f64, Vec<f64>)> {
    if ckpt.header.env != env.name() {
        return Err(Error::Evaluation(format!(
            "checkpoint was trained on {}, not {}",
            ckpt.header.env,
            env.name()
        )));
    }
    let (agent, scaler) = ckpt.agent()?;
    let returns = evaluate_agent(&agent, &scaler, env, episodes, seed)?;
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok((mean, returns))
}
