//! Episode-structured replay memory.
//!
//! Episodes are stored whole and leave in arrival order. Every stored action keeps the
//! behavior statistics it was sampled with plus the most recent value, importance weight
//! and clipped-trace targets, which V-RACER refreshes as samples are replayed. The memory
//! also owns the far-policy counter, the penalty coefficient `beta` and the state/reward
//! normalization statistics.

mod per;

use std::collections::VecDeque;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::codec::{ByteReader, ByteWriter};
use crate::learners::retrace;
use crate::policy::{BehaviorRecord, GaussianPolicy};
use crate::rng::Rng;

pub use per::{PerConfig, RankIndex};

/// Guards the divisions in state standardization and reward scaling.
pub const NORMALIZATION_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closing {
    /// A terminal state: no value beyond it.
    Terminal,
    /// Cut by the time limit: bootstrap from the value of the last state.
    Truncated,
}

/// One observation as produced by the acting loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStep {
    pub state: Vec<f64>,
    /// Absent on the closing step.
    pub action: Option<Vec<f64>>,
    /// Reward received on arrival at this state; zero for the first step.
    pub reward: f64,
    pub behavior: Option<BehaviorRecord>,
    /// Value at acting time; on the closing step the bootstrap value.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<TimeStep>,
    pub closing: Closing,
}

impl Episode {
    /// Undiscounted sum of raw rewards.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proximity {
    Near,
    Far,
}

/// Near-policy iff `1/c_max < rho < c_max`.
pub fn classify(rho: f64, c_max: f64) -> Proximity {
    if rho > 1.0 / c_max && rho < c_max {
        Proximity::Near
    } else {
        Proximity::Far
    }
}

/// Penalty coefficient feedback: shrink `beta` while the far fraction exceeds `d`,
/// otherwise relax it toward one.
pub fn update_beta(beta: f64, n_far: usize, n_obs: usize, d: f64, eta: f64) -> f64 {
    let frac = if n_obs == 0 {
        0.0
    } else {
        n_far as f64 / n_obs as f64
    };
    let next = if frac > d {
        (1.0 - eta) * beta
    } else {
        (1.0 - eta) * beta + eta
    };
    next.clamp(0.0, 1.0)
}

/// Address of a stored action: episode id and step index within the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepRef {
    pub episode: u64,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    /// Capacity `N` in observations.
    pub capacity: usize,
    /// Observations required before sampling.
    pub n_start: usize,
    pub gamma: f64,
    /// Target far-policy fraction `D`.
    pub far_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct StoredEpisode {
    id: u64,
    len: usize,
    closing: Closing,
    states: Vec<f64>,
    actions: Vec<f64>,
    mu_mean: Vec<f64>,
    mu_std: Vec<f64>,
    rewards: Vec<f64>,
    values: Vec<f64>,
    q_values: Vec<f64>,
    rhos: Vec<f64>,
    vtbc: Vec<f64>,
    qret: Vec<f64>,
    far: Vec<bool>,
    priority: Vec<f64>,
}

impl StoredEpisode {
    fn n_actions(&self) -> usize {
        self.len - 1
    }

    fn recompute_targets(&mut self, gamma: f64, reward_div: f64) {
        let (v, q) = retrace::vtbc_backward(
            &self.rewards,
            &self.values,
            Some(&self.q_values),
            &self.rhos,
            gamma,
            reward_div,
        );
        self.vtbc = v;
        self.qret = q;
    }
}

/// Borrowed view of one stored action and its successor.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub state: &'a [f64],
    pub action: &'a [f64],
    pub mu_mean: &'a [f64],
    pub mu_std: &'a [f64],
    /// Raw reward `r_{t+1}`.
    pub reward: f64,
    pub next_state: &'a [f64],
    /// Set when the successor is a terminal state (no bootstrap).
    pub next_terminal: bool,
    pub value: f64,
    pub rho: f64,
    pub vtbc: f64,
    pub qret: f64,
    pub far: bool,
}

impl StepView<'_> {
    pub fn behavior(&self) -> BehaviorRecord {
        GaussianPolicy {
            mean: self.mu_mean.to_vec(),
            stddev: self.mu_std.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMemory {
    cfg: ReplayConfig,
    state_dim: usize,
    action_dim: usize,
    episodes: VecDeque<StoredEpisode>,
    next_id: u64,
    n_obs: usize,
    n_samples: usize,
    n_far: usize,
    beta: f64,
    state_mean: Vec<f64>,
    state_std: Vec<f64>,
    stats_ready: bool,
    reward_scale: f64,
    /// Cumulative stored-action counts, one entry per episode plus a leading zero.
    prefix: Vec<usize>,
    per: Option<RankIndex>,
    max_priority: f64,
}

impl ReplayMemory {
    pub fn new(cfg: ReplayConfig, state_dim: usize, action_dim: usize) -> Self {
        Self {
            cfg,
            state_dim,
            action_dim,
            episodes: VecDeque::new(),
            next_id: 0,
            n_obs: 0,
            n_samples: 0,
            n_far: 0,
            beta: 1.0,
            state_mean: vec![0.0; state_dim],
            state_std: vec![1.0; state_dim],
            stats_ready: false,
            reward_scale: 1.0,
            prefix: vec![0],
            per: None,
            max_priority: 1.0,
        }
    }

    pub fn with_rank_per(mut self, per: PerConfig) -> Self {
        self.per = Some(RankIndex::new(per));
        self
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Stored observations, closing steps included.
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Stored actions, i.e. samples eligible for replay.
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_far(&self) -> usize {
        self.n_far
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn far_fraction(&self) -> f64 {
        if self.n_samples == 0 {
            0.0
        } else {
            self.n_far as f64 / self.n_samples as f64
        }
    }

    pub fn is_warm(&self) -> bool {
        self.n_obs >= self.cfg.n_start
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: f64) {
        self.beta = beta.clamp(0.0, 1.0);
    }

    /// Apply one step of the penalty-coefficient controller with learning rate `eta`.
    pub fn update_beta(&mut self, eta: f64) -> f64 {
        self.beta = update_beta(self.beta, self.n_far, self.n_samples, self.cfg.far_target, eta);
        self.beta
    }

    pub fn episode_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.episodes.iter().map(|e| e.id)
    }

    fn index_of(&self, episode: u64) -> Option<usize> {
        let front = self.episodes.front()?.id;
        let idx = episode.checked_sub(front)? as usize;
        (idx < self.episodes.len()).then_some(idx)
    }

    fn stored(&self, r: StepRef) -> Result<(usize, &StoredEpisode)> {
        let idx = self.index_of(r.episode).ok_or(Error::InvalidStep {
            episode: r.episode,
            step: r.step,
        })?;
        let ep = &self.episodes[idx];
        if r.step >= ep.n_actions() {
            return Err(Error::InvalidStep {
                episode: r.episode,
                step: r.step,
            });
        }
        Ok((idx, ep))
    }

    fn validate(&self, episode: &Episode) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedEpisode(m));
        let steps = &episode.steps;
        if steps.len() < 2 {
            return bad(format!("{} observations, need at least 2", steps.len()));
        }
        if steps[0].reward != 0.0 {
            return bad(format!("first reward is {}, must be 0", steps[0].reward));
        }
        let last = steps.len() - 1;
        for (i, s) in steps.iter().enumerate() {
            if s.state.len() != self.state_dim {
                return bad(format!("step {i} state has {} components", s.state.len()));
            }
            if !s.reward.is_finite() || !s.value.is_finite() || s.state.iter().any(|x| !x.is_finite())
            {
                return bad(format!("step {i} holds a non-finite value"));
            }
            match (i == last, &s.action, &s.behavior) {
                (false, Some(a), Some(mu)) => {
                    if a.len() != self.action_dim || mu.dim() != self.action_dim {
                        return bad(format!("step {i} action dimension mismatch"));
                    }
                }
                (false, _, _) => return bad(format!("step {i} lacks action or behavior")),
                (true, None, None) => {}
                (true, _, _) => return bad("closing step carries an action".into()),
            }
        }
        if episode.closing == Closing::Terminal && steps[last].value != 0.0 {
            return bad("terminal step must store value 0".into());
        }
        Ok(())
    }

    /// Append an episode, evicting the oldest ones while more than `N` observations are held.
    /// Returns the number of evicted episodes.
    pub fn add_episode(&mut self, episode: Episode) -> Result<usize> {
        self.validate(&episode)?;
        let len = episode.steps.len();
        let n_act = len - 1;
        let mut ep = StoredEpisode {
            id: self.next_id,
            len,
            closing: episode.closing,
            states: Vec::with_capacity(len * self.state_dim),
            actions: Vec::with_capacity(n_act * self.action_dim),
            mu_mean: Vec::with_capacity(n_act * self.action_dim),
            mu_std: Vec::with_capacity(n_act * self.action_dim),
            rewards: Vec::with_capacity(len),
            values: Vec::with_capacity(len),
            q_values: Vec::new(),
            rhos: vec![1.0; n_act],
            vtbc: Vec::new(),
            qret: Vec::new(),
            far: vec![false; n_act],
            priority: vec![self.max_priority; n_act],
        };
        for s in episode.steps {
            ep.states.extend_from_slice(&s.state);
            ep.rewards.push(s.reward);
            ep.values.push(s.value);
            if let (Some(a), Some(mu)) = (s.action, s.behavior) {
                ep.actions.extend_from_slice(&a);
                ep.mu_mean.extend_from_slice(&mu.mean);
                ep.mu_std.extend_from_slice(&mu.stddev);
            }
        }
        ep.q_values = ep.values.clone();
        ep.recompute_targets(self.cfg.gamma, self.reward_divisor());
        self.next_id += 1;
        self.n_obs += len;
        self.n_samples += n_act;
        self.episodes.push_back(ep);

        let mut evicted = 0;
        while self.n_obs > self.cfg.capacity && self.episodes.len() > 1 {
            let old = self.episodes.pop_front().unwrap();
            self.n_obs -= old.len;
            self.n_samples -= old.n_actions();
            self.n_far -= old.far.iter().filter(|&&f| f).count();
            evicted += 1;
        }
        self.rebuild_prefix();
        if let Some(per) = &mut self.per {
            per.mark_stale();
        }
        Ok(evicted)
    }

    fn rebuild_prefix(&mut self) {
        self.prefix.clear();
        self.prefix.push(0);
        let mut acc = 0;
        for e in &self.episodes {
            acc += e.n_actions();
            self.prefix.push(acc);
        }
    }

    /// Map a flat index over all stored actions to its address.
    fn locate(&self, flat: usize) -> StepRef {
        let i = self.prefix.partition_point(|&p| p <= flat) - 1;
        StepRef {
            episode: self.episodes[i].id,
            step: flat - self.prefix[i],
        }
    }

    pub fn step(&self, r: StepRef) -> Result<StepView<'_>> {
        let (_, ep) = self.stored(r)?;
        let (ds, da, t) = (self.state_dim, self.action_dim, r.step);
        let next_is_closing = t + 1 == ep.len - 1;
        Ok(StepView {
            state: &ep.states[t * ds..(t + 1) * ds],
            action: &ep.actions[t * da..(t + 1) * da],
            mu_mean: &ep.mu_mean[t * da..(t + 1) * da],
            mu_std: &ep.mu_std[t * da..(t + 1) * da],
            reward: ep.rewards[t + 1],
            next_state: &ep.states[(t + 1) * ds..(t + 2) * ds],
            next_terminal: next_is_closing && ep.closing == Closing::Terminal,
            value: ep.values[t],
            rho: ep.rhos[t],
            vtbc: ep.vtbc[t],
            qret: ep.qret[t],
            far: ep.far[t],
        })
    }

    /// Stored `(vtbc, qret)` of an episode.
    pub fn episode_targets(&self, episode: u64) -> Option<(&[f64], &[f64])> {
        let e = &self.episodes[self.index_of(episode)?];
        Some((&e.vtbc, &e.qret))
    }

    /// Stored `(rewards, values, q_values, rhos, closing)` of an episode.
    #[allow(clippy::type_complexity)]
    pub fn episode_caches(&self, episode: u64) -> Option<(&[f64], &[f64], &[f64], &[f64], Closing)> {
        let e = &self.episodes[self.index_of(episode)?];
        Some((&e.rewards, &e.values, &e.q_values, &e.rhos, e.closing))
    }

    fn set_far(&mut self, idx: usize, t: usize, far: bool) {
        let old = std::mem::replace(&mut self.episodes[idx].far[t], far);
        match (old, far) {
            (false, true) => self.n_far += 1,
            (true, false) => self.n_far -= 1,
            _ => {}
        }
    }

    /// Store a new importance weight and reclassify the sample against `c_max`.
    pub fn update_rho(&mut self, r: StepRef, rho: f64, c_max: f64) -> Result<()> {
        let (idx, _) = self.stored(r)?;
        self.episodes[idx].rhos[r.step] = rho;
        self.set_far(idx, r.step, classify(rho, c_max) == Proximity::Far);
        Ok(())
    }

    /// Replace the cached value and importance weight of a replayed sample and correct the
    /// clipped-trace targets of this and every earlier step of its episode.
    pub fn refresh_sample(&mut self, r: StepRef, value: f64, rho: f64, c_max: f64) -> Result<()> {
        self.refresh_sample_with_q(r, value, value, rho, c_max)
    }

    /// As [`Self::refresh_sample`] with an explicit action value for the trace correction.
    pub fn refresh_sample_with_q(
        &mut self,
        r: StepRef,
        value: f64,
        q_value: f64,
        rho: f64,
        c_max: f64,
    ) -> Result<()> {
        let (idx, _) = self.stored(r)?;
        self.set_far(idx, r.step, classify(rho, c_max) == Proximity::Far);
        let (gamma, div) = (self.cfg.gamma, self.reward_divisor());
        let ep = &mut self.episodes[idx];
        ep.values[r.step] = value;
        ep.q_values[r.step] = q_value;
        ep.rhos[r.step] = rho;
        retrace::backward_prefix(
            &ep.rewards,
            &ep.values,
            Some(&ep.q_values),
            &ep.rhos,
            gamma,
            div,
            &mut ep.vtbc,
            &mut ep.qret,
            r.step + 1,
        );
        Ok(())
    }

    /// Reclassify every stored sample against `c_max`.
    pub fn recount_far(&mut self, c_max: f64) -> usize {
        let mut n = 0;
        for e in &mut self.episodes {
            for (f, &rho) in e.far.iter_mut().zip(&e.rhos) {
                *f = classify(rho, c_max) == Proximity::Far;
                n += *f as usize;
            }
        }
        self.n_far = n;
        n
    }

    /// Recompute targets of every episode from the cached values and weights.
    pub fn recompute_all_targets(&mut self) {
        let (gamma, div) = (self.cfg.gamma, self.reward_divisor());
        for e in &mut self.episodes {
            e.recompute_targets(gamma, div);
        }
    }

    /// Overwrite cached values of every stored observation (the closing step of terminal
    /// episodes keeps zero) and recompute all targets. `value_of` receives the raw state.
    pub fn revalue_all(&mut self, mut value_of: impl FnMut(&[f64]) -> f64) {
        let ds = self.state_dim;
        for e in &mut self.episodes {
            for t in 0..e.len {
                let closing = t + 1 == e.len;
                if closing && e.closing == Closing::Terminal {
                    continue;
                }
                let v = value_of(&e.states[t * ds..(t + 1) * ds]);
                e.values[t] = v;
                e.q_values[t] = v;
            }
        }
        self.recompute_all_targets();
    }

    fn check_warm(&self) -> Result<()> {
        if !self.is_warm() || self.n_samples == 0 {
            return Err(Error::NotWarmedUp {
                have: self.n_obs,
                need: self.cfg.n_start.max(1),
            });
        }
        Ok(())
    }

    /// `b` independent uniform draws over stored actions, with replacement.
    pub fn sample_uniform(&self, b: usize, rng: &mut Rng) -> Result<Vec<StepRef>> {
        self.check_warm()?;
        Ok((0..b)
            .map(|_| self.locate(rng.random_range(0..self.n_samples)))
            .collect())
    }

    /// Rank-based prioritized draws with normalized importance-correction weights.
    pub fn sample_rank_per(
        &mut self,
        b: usize,
        beta_per: f64,
        rng: &mut Rng,
    ) -> Result<(Vec<StepRef>, Vec<f64>)> {
        self.check_warm()?;
        let mut per = self
            .per
            .take()
            .ok_or_else(|| Error::Config("rank-based sampling not enabled".into()))?;
        if per.is_stale() {
            per.rebuild(self.all_priorities());
        }
        let out = per.sample(b, beta_per, rng);
        self.per = Some(per);
        Ok(out)
    }

    fn all_priorities(&self) -> Vec<(StepRef, f64)> {
        self.episodes
            .iter()
            .flat_map(|e| {
                e.priority.iter().enumerate().map(move |(t, &p)| {
                    (
                        StepRef {
                            episode: e.id,
                            step: t,
                        },
                        p,
                    )
                })
            })
            .collect()
    }

    /// Record a fresh TD error magnitude as the sample's priority.
    pub fn update_priority(&mut self, r: StepRef, td_error: f64) -> Result<()> {
        let (idx, _) = self.stored(r)?;
        let p = td_error.abs();
        self.episodes[idx].priority[r.step] = p;
        if p > self.max_priority {
            self.max_priority = p;
        }
        Ok(())
    }

    pub fn priority(&self, r: StepRef) -> Result<f64> {
        let (idx, _) = self.stored(r)?;
        Ok(self.episodes[idx].priority[r.step])
    }

    /// Force the rank order to be rebuilt before the next prioritized draw.
    pub fn mark_ranks_stale(&mut self) {
        if let Some(per) = &mut self.per {
            per.mark_stale();
        }
    }

    pub fn rank_per(&self) -> Option<&RankIndex> {
        self.per.as_ref()
    }

    /// Mean and population standard deviation of all stored states. Computed once; later
    /// calls return the frozen statistics.
    pub fn update_state_stats(&mut self) -> (&[f64], &[f64]) {
        if !self.stats_ready && self.n_obs > 0 {
            let ds = self.state_dim;
            let n = self.n_obs as f64;
            let mut mean = vec![0.0; ds];
            for e in &self.episodes {
                for s in e.states.chunks_exact(ds) {
                    mean.iter_mut().zip(s).for_each(|(m, x)| *m += x);
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; ds];
            for e in &self.episodes {
                for s in e.states.chunks_exact(ds) {
                    for ((v, x), m) in var.iter_mut().zip(s).zip(&mean) {
                        *v += (x - m) * (x - m);
                    }
                }
            }
            self.state_std = var.iter().map(|v| (v / n).sqrt()).collect();
            self.state_mean = mean;
            self.stats_ready = true;
        }
        (&self.state_mean, &self.state_std)
    }

    pub fn state_stats(&self) -> (&[f64], &[f64]) {
        (&self.state_mean, &self.state_std)
    }

    pub fn stats_ready(&self) -> bool {
        self.stats_ready
    }

    pub fn standardize(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; s.len()];
        self.standardize_into(s, &mut out);
        out
    }

    pub fn standardize_into(&self, s: &[f64], out: &mut [f64]) {
        for (((o, x), m), sd) in out
            .iter_mut()
            .zip(s)
            .zip(&self.state_mean)
            .zip(&self.state_std)
        {
            *o = (x - m) / (sd + NORMALIZATION_EPS);
        }
    }

    /// `sigma_r = sqrt(mean of r_{t+1}^2)` over stored actions.
    pub fn update_reward_scale(&mut self) -> f64 {
        if self.n_samples > 0 {
            let sq: f64 = self
                .episodes
                .iter()
                .flat_map(|e| e.rewards[1..].iter())
                .map(|r| r * r)
                .sum();
            self.reward_scale = (sq / self.n_samples as f64).sqrt();
        }
        self.reward_scale
    }

    pub fn reward_scale(&self) -> f64 {
        self.reward_scale
    }

    pub fn reward_divisor(&self) -> f64 {
        self.reward_scale + NORMALIZATION_EPS
    }

    pub fn scale_reward(&self, r: f64) -> f64 {
        r / self.reward_divisor()
    }

    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        w.usize(self.state_dim);
        w.usize(self.action_dim);
        w.u64(self.next_id);
        w.usize(self.n_far);
        w.f64(self.beta);
        w.f64s(&self.state_mean);
        w.f64s(&self.state_std);
        w.bool(self.stats_ready);
        w.f64(self.reward_scale);
        w.f64(self.max_priority);
        w.usize(self.episodes.len());
        for e in &self.episodes {
            w.u64(e.id);
            w.usize(e.len);
            w.u8(match e.closing {
                Closing::Terminal => 0,
                Closing::Truncated => 1,
            });
            for v in [
                &e.states, &e.actions, &e.mu_mean, &e.mu_std, &e.rewards, &e.values,
                &e.q_values, &e.rhos, &e.vtbc, &e.qret, &e.priority,
            ] {
                w.f64s(v);
            }
            w.bools(&e.far);
        }
        match &self.per {
            Some(p) => {
                w.bool(true);
                p.encode(w);
            }
            None => w.bool(false),
        }
    }

    pub(crate) fn decode(cfg: ReplayConfig, r: &mut ByteReader<'_>) -> Result<Self> {
        let state_dim = r.usize()?;
        let action_dim = r.usize()?;
        let mut rm = Self::new(cfg, state_dim, action_dim);
        rm.next_id = r.u64()?;
        rm.n_far = r.usize()?;
        rm.beta = r.f64()?;
        rm.state_mean = r.f64s()?;
        rm.state_std = r.f64s()?;
        rm.stats_ready = r.bool()?;
        rm.reward_scale = r.f64()?;
        rm.max_priority = r.f64()?;
        let n = r.usize()?;
        for _ in 0..n {
            let id = r.u64()?;
            let len = r.usize()?;
            let closing = match r.u8()? {
                0 => Closing::Terminal,
                1 => Closing::Truncated,
                b => return Err(Error::Checkpoint(format!("bad closing tag {b}"))),
            };
            let mut cols = Vec::with_capacity(11);
            for _ in 0..11 {
                cols.push(r.f64s()?);
            }
            let far = r.bools()?;
            let mut c = cols.into_iter();
            let mut next = || c.next().unwrap();
            let e = StoredEpisode {
                id,
                len,
                closing,
                states: next(),
                actions: next(),
                mu_mean: next(),
                mu_std: next(),
                rewards: next(),
                values: next(),
                q_values: next(),
                rhos: next(),
                vtbc: next(),
                qret: next(),
                priority: next(),
                far,
            };
            if e.states.len() != len * state_dim
                || e.rhos.len() + 1 != len
                || e.far.len() + 1 != len
            {
                return Err(Error::Checkpoint(format!("episode {id} has inconsistent columns")));
            }
            rm.n_obs += len;
            rm.n_samples += len - 1;
            rm.episodes.push_back(e);
        }
        rm.rebuild_prefix();
        if r.bool()? {
            rm.per = Some(RankIndex::decode(r)?);
        }
        Ok(rm)
    }
}

#[cfg(test)]
mod tests;
