//! Run configuration: defaults, `key=value` overrides, validation and digest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::learners::advantage::AdvKind;
use crate::learners::ReplayMode;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Vracer,
    Ddpg,
    Naf,
}

impl Algo {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "vracer" | "v-racer" => Algo::Vracer,
            "ddpg" => Algo::Ddpg,
            "naf" => Algo::Naf,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Vracer => "vracer",
            Algo::Ddpg => "ddpg",
            Algo::Naf => "naf",
        }
    }
}

/// Parse a replay selection. A comma-separated list is accepted only to report conflicting
/// combinations; exactly one strategy must remain.
pub fn parse_replay(s: &str) -> Result<ReplayMode> {
    let modes = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| ReplayMode::parse(p).ok_or_else(|| Error::Config(format!("unknown replay mode '{p}'"))))
        .collect::<Result<Vec<_>>>()?;
    match modes.as_slice() {
        [m] => Ok(*m),
        [] => Err(Error::Config("empty replay mode".into())),
        ms if ms.contains(&ReplayMode::Per) && ms.iter().any(|m| m.is_refer()) => Err(Error::Config(
            "prioritized replay cannot be combined with ReF-ER".into(),
        )),
        _ => Err(Error::Config(format!("choose one replay mode, got '{s}'"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algo: Algo,
    pub replay: ReplayMode,
    pub adv: AdvKind,
    pub env: EnvId,
    /// Total observations `T_max`, warm-up included.
    pub steps: u64,
    pub seed: u64,
    pub workers: usize,
    /// Replay capacity `N` in observations.
    pub capacity: usize,
    pub n_start: usize,
    /// Mini-batch size; `None` picks 256 (V-RACER, NAF) or 128 (DDPG).
    pub batch: Option<usize>,
    /// Observations per gradient step `F`.
    pub ratio: f64,
    pub gamma: f64,
    pub eta: f64,
    /// DDPG actor learning rate.
    pub actor_eta: f64,
    pub c: f64,
    /// Annealing rate `A`; `None` picks 5e-7, or 0 for DDPG without ReF-ER.
    pub anneal: Option<f64>,
    pub far_target: f64,
    pub hidden: Vec<usize>,
    /// Policy standard deviation: initial value for V-RACER, fixed for DDPG and NAF.
    pub sigma: f64,
    pub target_rate: f64,
    pub weight_decay: f64,
    pub per_alpha: f64,
    pub per_beta0: f64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    /// Gradient steps between reward-scale updates.
    pub reward_every: u64,
    /// Observations per metrics row.
    pub bin_width: u64,
    pub dkl_samples: usize,
    /// Record elapsed seconds in the metrics; when off the column is zero.
    pub wall_clock: bool,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Vracer,
            replay: ReplayMode::Refer,
            adv: AdvKind::None,
            env: EnvId::Pendulum,
            steps: 300_000,
            seed: 1,
            workers: 1,
            capacity: 1 << 18,
            n_start: 1 << 15,
            batch: None,
            ratio: 1.0,
            gamma: 0.995,
            eta: 1e-4,
            actor_eta: 1e-5,
            c: 4.0,
            anneal: None,
            far_target: 0.1,
            hidden: vec![128, 128],
            sigma: 0.2,
            target_rate: 0.01,
            weight_decay: 1e-4,
            per_alpha: 0.7,
            per_beta0: 0.4,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            reward_every: 1000,
            bin_width: 1000,
            dkl_samples: 256,
            wall_clock: true,
            execution: Execution::Parallel,
        }
    }
}

/// Keys left out of the digest: they do not change the trajectory of a run.
const UNDIGESTED: [&str; 2] = ["steps", "execution"];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{v}' for {key}"))),
    }
}

impl TrainConfig {
    pub fn batch(&self) -> usize {
        self.batch.unwrap_or(match self.algo {
            Algo::Ddpg => 128,
            _ => 256,
        })
    }

    pub fn anneal(&self) -> f64 {
        self.anneal.unwrap_or(match (self.algo, self.replay.is_refer()) {
            (Algo::Ddpg, false) => 0.0,
            _ => 5e-7,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "algo" => {
                self.algo = Algo::parse(v).ok_or_else(|| Error::Config(format!("unknown algo '{v}'")))?
            }
            "replay" => self.replay = parse_replay(v)?,
            "adv" => {
                self.adv =
                    AdvKind::parse(v).ok_or_else(|| Error::Config(format!("unknown advantage '{v}'")))?
            }
            "env" => {
                self.env = EnvId::parse(v).ok_or_else(|| Error::Config(format!("unknown env '{v}'")))?
            }
            "steps" => self.steps = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            "capacity" => self.capacity = parse_num(key, v)?,
            "n_start" => self.n_start = parse_num(key, v)?,
            "batch" => self.batch = if v == "auto" { None } else { Some(parse_num(key, v)?) },
            "ratio" => self.ratio = parse_num(key, v)?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "eta" => self.eta = parse_num(key, v)?,
            "actor_eta" => self.actor_eta = parse_num(key, v)?,
            "c" => self.c = parse_num(key, v)?,
            "anneal" => self.anneal = if v == "auto" { None } else { Some(parse_num(key, v)?) },
            "far_target" => self.far_target = parse_num(key, v)?,
            "hidden" => {
                self.hidden = v
                    .split(',')
                    .map(|x| parse_num::<usize>(key, x.trim()))
                    .collect::<Result<_>>()?
            }
            "sigma" => self.sigma = parse_num(key, v)?,
            "target_rate" => self.target_rate = parse_num(key, v)?,
            "weight_decay" => self.weight_decay = parse_num(key, v)?,
            "per_alpha" => self.per_alpha = parse_num(key, v)?,
            "per_beta0" => self.per_beta0 = parse_num(key, v)?,
            "ou_theta" => self.ou_theta = parse_num(key, v)?,
            "ou_sigma" => self.ou_sigma = parse_num(key, v)?,
            "reward_every" => self.reward_every = parse_num(key, v)?,
            "bin_width" => self.bin_width = parse_num(key, v)?,
            "dkl_samples" => self.dkl_samples = parse_num(key, v)?,
            "wall_clock" => self.wall_clock = parse_bool(key, v)?,
            "execution" => {
                self.execution = match v {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(Error::Config(format!("unknown execution '{v}'"))),
                }
            }
            k => return Err(Error::Config(format!("unknown key '{k}'"))),
        }
        Ok(())
    }

    /// Apply `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text)
    }

    /// Every setting with defaults resolved, as canonical strings.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("algo", self.algo.name().into()),
            ("replay", self.replay.name().into()),
            ("adv", self.adv.name().into()),
            ("env", self.env.name().into()),
            ("steps", self.steps.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("capacity", self.capacity.to_string()),
            ("n_start", self.n_start.to_string()),
            ("batch", self.batch().to_string()),
            ("ratio", self.ratio.to_string()),
            ("gamma", self.gamma.to_string()),
            ("eta", self.eta.to_string()),
            ("actor_eta", self.actor_eta.to_string()),
            ("c", self.c.to_string()),
            ("anneal", self.anneal().to_string()),
            ("far_target", self.far_target.to_string()),
            ("hidden", hidden.join(",")),
            ("sigma", self.sigma.to_string()),
            ("target_rate", self.target_rate.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("per_alpha", self.per_alpha.to_string()),
            ("per_beta0", self.per_beta0.to_string()),
            ("ou_theta", self.ou_theta.to_string()),
            ("ou_sigma", self.ou_sigma.to_string()),
            ("reward_every", self.reward_every.to_string()),
            ("bin_width", self.bin_width.to_string()),
            ("dkl_samples", self.dkl_samples.to_string()),
            ("wall_clock", self.wall_clock.to_string()),
            (
                "execution",
                match self.execution {
                    Execution::Parallel => "parallel".into(),
                    Execution::Sequential => "sequential".into(),
                },
            ),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in entries {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// SHA-256 over the sorted `key=value` lines of every setting that shapes the run
    /// (`steps` and `execution` excluded), hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if UNDIGESTED.contains(&k.as_str()) {
                continue;
            }
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.adv != AdvKind::None && self.algo != Algo::Vracer {
            return fail(format!("advantage heads need vracer, not {}", self.algo.name()));
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.n_start == 0 || self.capacity < self.n_start {
            return fail(format!(
                "need 0 < n_start <= capacity (got {} and {})",
                self.n_start, self.capacity
            ));
        }
        if self.capacity <= self.env.spec().max_episode_steps {
            return fail("capacity must exceed the episode length".into());
        }
        if self.batch() == 0 || self.bin_width == 0 || self.reward_every == 0 {
            return fail("batch, bin_width and reward_every must be positive".into());
        }
        if !(self.ratio > 0.0) {
            return fail(format!("ratio must be positive, got {}", self.ratio));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.far_target > 0.0 && self.far_target < 1.0) {
            return fail(format!("far_target must lie in (0, 1), got {}", self.far_target));
        }
        if !(self.eta > 0.0 && self.actor_eta > 0.0 && self.c > 0.0 && self.anneal() >= 0.0) {
            return fail("eta, actor_eta and c must be positive, anneal non-negative".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer sizes must be positive".into());
        }
        if !(self.sigma > 0.0) || !(0.0..=1.0).contains(&self.target_rate) {
            return fail("sigma must be positive and target_rate in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.per_beta0) || self.per_alpha < 0.0 {
            return fail("per_beta0 must lie in [0, 1] and per_alpha be non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_algo() {
        let mut c = TrainConfig::default();
        assert_eq!(c.batch(), 256);
        assert_eq!(c.anneal(), 5e-7);
        c.set("algo", "ddpg").unwrap();
        assert_eq!(c.batch(), 128);
        assert_eq!(c.anneal(), 5e-7);
        c.set("replay", "er").unwrap();
        assert_eq!(c.anneal(), 0.0);
        c.set("anneal", "1e-6").unwrap();
        assert_eq!(c.anneal(), 1e-6);
        assert_eq!(c.capacity, 262_144);
    }

    #[test]
    fn replay_combinations() {
        assert_eq!(parse_replay("per").unwrap(), ReplayMode::Per);
        assert!(parse_replay("per,refer").is_err());
        assert!(parse_replay("refer1 , per").is_err());
        assert!(parse_replay("er,refer").is_err());
        assert!(parse_replay("bogus").is_err());
    }

    #[test]
    fn file_overrides_and_validation() {
        let mut c = TrainConfig::default();
        c.apply_str("# comment\nseed = 7\nhidden=64,32\n\nwall_clock=false # trailing\n")
            .unwrap();
        assert_eq!((c.seed, c.hidden.clone(), c.wall_clock), (7, vec![64, 32], false));
        assert!(c.apply_str("nokey").is_err());
        assert!(c.clone().set("unknown", "1").is_err());
        c.validate().unwrap();
        let mut bad = c.clone();
        bad.set("adv", "quadratic").unwrap();
        bad.set("algo", "naf").unwrap();
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.far_target = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn digest_ignores_steps_and_round_trips() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.steps = 5;
        b.execution = Execution::Sequential;
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
        let back = TrainConfig::from_entries(&b.entries()).unwrap();
        assert_eq!(back.entries(), b.entries());
        assert_eq!(a.digest().len(), 64);
    }
}
