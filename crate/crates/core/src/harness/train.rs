//! The master loop: warm-up, interleaved environment and gradient steps, metrics bins.

use std::time::Instant;

use crate::envs::{action_rescale, Env, EnvSpec, Status};
use crate::error::{Error, Result};
use crate::harness::agent::{Agent, StateScaler};
use crate::harness::codec::{ByteReader, ByteWriter};
use crate::harness::config::{Algo, TrainConfig};
use crate::harness::metrics::{summarize, MetricsRow};
use crate::learners::{ReplayMode, Sample, StepContext};
use crate::optim::Schedule;
use crate::policy::{kl_divergence, GaussianPolicy};
use crate::replay::{Closing, Episode, PerConfig, ReplayConfig, ReplayMemory, TimeStep};
use crate::rng::{self, Rng, RngState, Stream};

/// Ornstein-Uhlenbeck exploration: `x <- (1 - theta) x + sigma N(0, 1)`, added to the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
}

impl OuNoise {
    /// Behavior distribution of the next action given the current noise state `x`.
    pub fn behavior(&self, mean: &[f64], x: &[f64]) -> Result<GaussianPolicy> {
        let m = mean.iter().zip(x).map(|(m, x)| m + (1.0 - self.theta) * x).collect();
        GaussianPolicy::isotropic(m, self.sigma)
    }
}

/// One environment instance with its random stream and the episode in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct Worker {
    pub env: Env,
    pub rng: Rng,
    obs: Vec<f64>,
    reward: f64,
    status: Status,
    noise: Vec<f64>,
    episode: Vec<TimeStep>,
}

impl Worker {
    pub fn new(env: Env, mut rng: Rng) -> Self {
        let mut env = env;
        let obs = env.reset(&mut rng);
        let da = env.spec().action_dim;
        Self {
            env,
            rng,
            obs,
            reward: 0.0,
            status: Status::Running,
            noise: vec![0.0; da],
            episode: Vec::new(),
        }
    }

    /// Record the current observation. Returns the raw return of an episode that this
    /// observation concluded.
    fn advance(
        &mut self,
        agent: &Agent,
        scaler: &StateScaler,
        spec: &EnvSpec,
        ou: Option<OuNoise>,
        rm: &mut ReplayMemory,
    ) -> Result<Option<f64>> {
        let s = scaler.apply(&self.obs);
        if self.status == Status::Running {
            let (pi, value) = agent.act_info(&s)?;
            let (action, behavior) = match ou {
                Some(ou) => {
                    let mu = ou.behavior(&pi.mean, &self.noise)?;
                    let a = mu.sample(&mut self.rng);
                    self.noise = a.iter().zip(&pi.mean).map(|(a, m)| a - m).collect();
                    (a, mu)
                }
                None => (pi.sample(&mut self.rng), pi),
            };
            let (next, reward, status) = self.env.step(&action_rescale(spec, &action));
            self.episode.push(TimeStep {
                state: std::mem::replace(&mut self.obs, next),
                action: Some(action),
                reward: self.reward,
                behavior: Some(behavior),
                value,
            });
            self.reward = reward;
            self.status = status;
            return Ok(None);
        }
        let closing = if self.status == Status::Terminal {
            Closing::Terminal
        } else {
            Closing::Truncated
        };
        let value = match closing {
            Closing::Terminal => 0.0,
            Closing::Truncated => agent.value(&s)?,
        };
        let new_obs = self.env.reset(&mut self.rng);
        self.episode.push(TimeStep {
            state: std::mem::replace(&mut self.obs, new_obs),
            action: None,
            reward: self.reward,
            behavior: None,
            value,
        });
        let episode = Episode {
            steps: std::mem::take(&mut self.episode),
            closing,
        };
        let ret = episode.total_reward();
        rm.add_episode(episode)?;
        self.reward = 0.0;
        self.status = Status::Running;
        self.noise.iter_mut().for_each(|x| *x = 0.0);
        Ok(Some(ret))
    }

    fn revalue(&mut self, agent: &Agent, scaler: &StateScaler) -> Result<()> {
        for step in &mut self.episode {
            step.value = agent.value(&scaler.apply(&step.state))?;
        }
        Ok(())
    }

    fn encode(&self, w: &mut ByteWriter) {
        self.env.encode(w);
        encode_rng(w, &self.rng);
        w.f64s(&self.obs);
        w.f64(self.reward);
        w.u8(match self.status {
            Status::Running => 0,
            Status::Terminal => 1,
            Status::Truncated => 2,
        });
        w.f64s(&self.noise);
        w.usize(self.episode.len());
        for s in &self.episode {
            w.f64s(&s.state);
            w.f64(s.reward);
            w.f64(s.value);
            w.bool(s.action.is_some());
            if let (Some(a), Some(mu)) = (&s.action, &s.behavior) {
                w.f64s(a);
                w.f64s(&mu.mean);
                w.f64s(&mu.stddev);
            }
        }
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let env = Env::decode(r)?;
        let rng = decode_rng(r)?;
        let obs = r.f64s()?;
        let reward = r.f64()?;
        let status = match r.u8()? {
            0 => Status::Running,
            1 => Status::Terminal,
            2 => Status::Truncated,
            b => return Err(Error::Checkpoint(format!("bad worker status {b}"))),
        };
        let noise = r.f64s()?;
        let n = r.usize()?;
        let mut episode = Vec::with_capacity(n);
        for _ in 0..n {
            let state = r.f64s()?;
            let reward = r.f64()?;
            let value = r.f64()?;
            let (action, behavior) = if r.bool()? {
                let a = r.f64s()?;
                let mean = r.f64s()?;
                let stddev = r.f64s()?;
                (Some(a), Some(GaussianPolicy { mean, stddev }))
            } else {
                (None, None)
            };
            episode.push(TimeStep {
                state,
                action,
                reward,
                behavior,
                value,
            });
        }
        Ok(Self {
            env,
            rng,
            obs,
            reward,
            status,
            noise,
            episode,
        })
    }
}

pub(crate) fn encode_rng(w: &mut ByteWriter, rng: &Rng) {
    let s = RngState::capture(rng);
    w.bytes(&s.seed);
    w.u64(s.stream);
    w.u128(s.word_pos);
}

pub(crate) fn decode_rng(r: &mut ByteReader<'_>) -> Result<Rng> {
    let seed: [u8; 32] = r
        .bytes()?
        .try_into()
        .map_err(|_| Error::Checkpoint("bad generator seed".into()))?;
    let stream = r.u64()?;
    let word_pos = r.u128()?;
    Ok(RngState {
        seed,
        stream,
        word_pos,
    }
    .restore())
}

pub fn replay_config(cfg: &TrainConfig) -> ReplayConfig {
    ReplayConfig {
        capacity: cfg.capacity,
        n_start: cfg.n_start,
        gamma: cfg.gamma,
        far_target: cfg.far_target,
    }
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub agent: Agent,
    pub rm: ReplayMemory,
    pub workers: Vec<Worker>,
    schedule: Schedule,
    spec: EnvSpec,
    scaler: StateScaler,
    replay_rng: Rng,
    metrics_rng: Rng,
    next_worker: usize,
    /// Observations collected, warm-up included.
    pub t: u64,
    /// Gradient steps taken.
    pub k: u64,
    t_warm: u64,
    warm_done: bool,
    bin_returns: Vec<f64>,
    wall_prior: f64,
    started: Instant,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.env.spec();
        let mut init = rng::stream(cfg.seed, Stream::Init);
        let agent = Agent::new(&cfg, spec.state_dim, spec.action_dim, &mut init)?;
        let mut rm = ReplayMemory::new(replay_config(&cfg), spec.state_dim, spec.action_dim);
        if cfg.replay == ReplayMode::Per {
            rm = rm.with_rank_per(PerConfig {
                alpha: cfg.per_alpha,
                beta0: cfg.per_beta0,
            });
        }
        let workers = (0..cfg.workers)
            .map(|i| {
                Worker::new(
                    cfg.env.make(),
                    rng::stream_id(cfg.seed, Stream::Worker as u64 + i as u64),
                )
            })
            .collect();
        Ok(Self {
            schedule: Schedule::new(cfg.eta, cfg.c, cfg.anneal())?,
            replay_rng: rng::stream(cfg.seed, Stream::Replay),
            metrics_rng: rng::stream(cfg.seed, Stream::Metrics),
            spec,
            agent,
            rm,
            workers,
            scaler: StateScaler::default(),
            next_worker: 0,
            t: 0,
            k: 0,
            t_warm: 0,
            warm_done: false,
            bin_returns: Vec::new(),
            wall_prior: 0.0,
            started: Instant::now(),
            cfg,
        })
    }

    pub fn scaler(&self) -> &StateScaler {
        &self.scaler
    }

    pub fn warm_done(&self) -> bool {
        self.warm_done
    }

    fn ou(&self) -> Option<OuNoise> {
        (self.cfg.algo == Algo::Ddpg && !self.cfg.replay.is_refer()).then_some(OuNoise {
            theta: self.cfg.ou_theta,
            sigma: self.cfg.ou_sigma,
        })
    }

    /// Train until `cfg.steps` observations.
    pub fn run(&mut self, on_row: impl FnMut(&MetricsRow) -> Result<()>) -> Result<()> {
        self.run_until(self.cfg.steps, on_row)
    }

    /// Train until `t_stop` observations (capped at `cfg.steps`). Stopping and continuing
    /// later yields the same trajectory as one uninterrupted call.
    pub fn run_until(&mut self, t_stop: u64, mut on_row: impl FnMut(&MetricsRow) -> Result<()>) -> Result<()> {
        self.started = Instant::now();
        let t_stop = t_stop.min(self.cfg.steps);
        let result = self.run_inner(t_stop, &mut on_row);
        if self.cfg.wall_clock {
            self.wall_prior += self.started.elapsed().as_secs_f64();
        }
        self.started = Instant::now();
        result
    }

    fn run_inner(&mut self, t_stop: u64, on_row: &mut impl FnMut(&MetricsRow) -> Result<()>) -> Result<()> {
        while self.t < t_stop {
            if !self.warm_done {
                if self.rm.is_warm() {
                    self.finish_warmup()?;
                    continue;
                }
            } else if (self.t - self.t_warm) as f64 >= self.cfg.ratio * self.k as f64 {
                if let Err(e) = self.grad_step() {
                    if matches!(e, Error::NonFinite(_)) {
                        let row = self.row()?;
                        on_row(&row)?;
                    }
                    return Err(e);
                }
                continue;
            }
            self.advance()?;
            if self.t % self.cfg.bin_width == 0 {
                let row = self.row()?;
                self.bin_returns.clear();
                on_row(&row)?;
            }
        }
        Ok(())
    }

    fn advance(&mut self) -> Result<()> {
        let ou = self.ou();
        let w = &mut self.workers[self.next_worker];
        if let Some(ret) = w.advance(&self.agent, &self.scaler, &self.spec, ou, &mut self.rm)? {
            self.bin_returns.push(ret);
        }
        self.next_worker = (self.next_worker + 1) % self.workers.len();
        self.t += 1;
        Ok(())
    }

    fn finish_warmup(&mut self) -> Result<()> {
        let (mean, std) = self.rm.update_state_stats();
        self.scaler = StateScaler {
            mean: mean.to_vec(),
            std: std.to_vec(),
        };
        self.rm.update_reward_scale();
        let (agent, scaler) = (&self.agent, &self.scaler);
        let mut failure = None;
        self.rm.revalue_all(|s| {
            agent.value(&scaler.apply(s)).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            })
        });
        if let Some(e) = failure {
            return Err(e);
        }
        for w in &mut self.workers {
            w.revalue(agent, scaler)?;
        }
        self.t_warm = self.t;
        self.warm_done = true;
        Ok(())
    }

    fn per_progress(&self) -> f64 {
        if self.cfg.steps == 0 {
            1.0
        } else {
            self.t as f64 / self.cfg.steps as f64
        }
    }

    fn grad_step(&mut self) -> Result<()> {
        let (c_max, eta) = self.schedule.anneal(self.t);
        let b = self.cfg.batch();
        let (refs, weights) = match self.rm.rank_per().map(|p| *p.config()) {
            Some(per) => {
                let beta_per = per.beta_at(self.per_progress());
                self.rm.sample_rank_per(b, beta_per, &mut self.replay_rng)?
            }
            None => (self.rm.sample_uniform(b, &mut self.replay_rng)?, vec![1.0; b]),
        };
        let samples = refs
            .iter()
            .zip(&weights)
            .map(|(&r, &weight)| {
                let v = self.rm.step(r)?;
                Ok(Sample {
                    state: self.scaler.apply(v.state),
                    action: v.action.to_vec(),
                    behavior: v.behavior(),
                    reward: self.rm.scale_reward(v.reward),
                    next_state: self.scaler.apply(v.next_state),
                    next_terminal: v.next_terminal,
                    qret: v.qret,
                    weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rules = self.cfg.replay.rules();
        let ctx = StepContext {
            c_max,
            beta: self.rm.beta(),
            gamma: self.cfg.gamma,
            rules,
            exec: self.cfg.execution,
        };
        let stats = self.agent.update(&samples, &ctx, eta)?;
        let per = self.rm.rank_per().is_some();
        for (&r, st) in refs.iter().zip(&stats) {
            match self.cfg.algo {
                Algo::Vracer => self.rm.refresh_sample_with_q(r, st.value, st.q_value, st.rho, c_max)?,
                Algo::Ddpg | Algo::Naf => self.rm.update_rho(r, st.rho, c_max)?,
            }
            if per {
                self.rm.update_priority(r, st.td_error)?;
            }
        }
        if rules.penalty {
            self.rm.update_beta(eta);
        }
        if self.k % self.cfg.reward_every == 0 {
            self.rm.update_reward_scale();
            self.rm.recount_far(c_max);
            self.rm.mark_ranks_stale();
        }
        self.k += 1;
        Ok(())
    }

    /// Mean `D_KL(mu_t || pi)` over uniformly drawn stored samples; zero before warm-up.
    pub fn average_kl(&mut self) -> Result<f64> {
        let n = self.cfg.dkl_samples;
        if !self.warm_done || !self.rm.is_warm() || self.rm.n_samples() == 0 || n == 0 {
            return Ok(0.0);
        }
        let refs = self.rm.sample_uniform(n, &mut self.metrics_rng)?;
        let mut total = 0.0;
        for r in refs {
            let v = self.rm.step(r)?;
            let pi = self.agent.policy(&self.scaler.apply(v.state))?;
            total += kl_divergence(&v.behavior(), &pi);
        }
        Ok(total / n as f64)
    }

    fn row(&mut self) -> Result<MetricsRow> {
        let (c_max, eta) = self.schedule.anneal(self.t);
        let avg_dkl = self.average_kl()?;
        let (mean_return, return_p20, return_p80) = summarize(&self.bin_returns);
        Ok(MetricsRow {
            time_step: self.t,
            grad_step: self.k,
            beta: self.rm.beta(),
            c_max,
            eta,
            far_fraction: self.rm.far_fraction(),
            avg_dkl,
            mean_return,
            return_p20,
            return_p80,
            sigma_r: self.rm.reward_scale(),
            wall_seconds: if self.cfg.wall_clock {
                self.wall_prior + self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    }

    /// Everything besides the tensors and the header needed to continue bit-exactly.
    pub(crate) fn encode_resume(&self, w: &mut ByteWriter) {
        w.u64(self.t);
        w.u64(self.k);
        w.u64(self.t_warm);
        w.bool(self.warm_done);
        w.usize(self.next_worker);
        w.f64s(&self.bin_returns);
        w.f64(self.wall_prior);
        encode_rng(w, &self.replay_rng);
        encode_rng(w, &self.metrics_rng);
        self.rm.encode(w);
        w.usize(self.workers.len());
        for wk in &self.workers {
            wk.encode(w);
        }
    }

    pub(crate) fn decode_resume(&mut self, r: &mut ByteReader<'_>) -> Result<()> {
        self.t = r.u64()?;
        self.k = r.u64()?;
        self.t_warm = r.u64()?;
        self.warm_done = r.bool()?;
        self.next_worker = r.usize()?;
        self.bin_returns = r.f64s()?;
        self.wall_prior = r.f64()?;
        self.replay_rng = decode_rng(r)?;
        self.metrics_rng = decode_rng(r)?;
        self.rm = ReplayMemory::decode(replay_config(&self.cfg), r)?;
        let n = r.usize()?;
        if n != self.cfg.workers {
            return Err(Error::Checkpoint(format!(
                "{n} workers stored, configuration has {}",
                self.cfg.workers
            )));
        }
        self.workers = (0..n).map(|_| Worker::decode(r)).collect::<Result<_>>()?;
        if self.next_worker >= n {
            return Err(Error::Checkpoint("worker index out of range".into()));
        }
        self.scaler = if self.rm.stats_ready() {
            let (mean, std) = self.rm.state_stats();
            StateScaler {
                mean: mean.to_vec(),
                std: std.to_vec(),
            }
        } else {
            StateScaler::default()
        };
        Ok(())
    }
}
