//! Rank-based prioritized sampling.
//!
//! Samples are ordered by decreasing |TD error| (stable, so ties keep insertion order) and
//! drawn with probability proportional to `rank^-alpha`. The order is rebuilt lazily when
//! the memory changes membership or the caller marks it stale.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::StepRef;
use crate::error::Result;
use crate::harness::codec::{ByteReader, ByteWriter};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerConfig {
    pub alpha: f64,
    /// Initial importance-correction exponent, annealed linearly to 1.
    pub beta0: f64,
}

impl Default for PerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            beta0: 0.4,
        }
    }
}

impl PerConfig {
    /// Correction exponent after a fraction `progress` of the run.
    pub fn beta_at(&self, progress: f64) -> f64 {
        self.beta0 + (1.0 - self.beta0) * progress.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankIndex {
    cfg: PerConfig,
    order: Vec<StepRef>,
    /// Cumulative unnormalized rank masses.
    cdf: Vec<f64>,
    stale: bool,
}

impl RankIndex {
    pub fn new(cfg: PerConfig) -> Self {
        Self {
            cfg,
            order: Vec::new(),
            cdf: Vec::new(),
            stale: true,
        }
    }

    pub fn config(&self) -> &PerConfig {
        &self.cfg
    }

    pub fn mark_stale(&mut self) {
        self.stale = true;
    }

    pub fn is_stale(&self) -> bool {
        self.stale
    }

    /// Rank probabilities `(1/rank)^alpha / Z` for `n` samples.
    pub fn rank_probabilities(alpha: f64, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-alpha)).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    pub fn rebuild(&mut self, mut items: Vec<(StepRef, f64)>) {
        items.sort_by(|a, b| b.1.total_cmp(&a.1));
        self.order = items.into_iter().map(|(r, _)| r).collect();
        if self.cdf.len() != self.order.len() {
            let mut acc = 0.0;
            self.cdf = (1..=self.order.len())
                .map(|r| {
                    acc += (r as f64).powf(-self.cfg.alpha);
                    acc
                })
                .collect();
        }
        self.stale = false;
    }

    /// Ranked samples, highest priority first.
    pub fn order(&self) -> &[StepRef] {
        &self.order
    }

    pub fn sample(&self, b: usize, beta_per: f64, rng: &mut Rng) -> (Vec<StepRef>, Vec<f64>) {
        let n = self.order.len();
        let total = *self.cdf.last().expect("non-empty rank index");
        let p_min = (n as f64).powf(-self.cfg.alpha) / total;
        let w_max = (n as f64 * p_min).powf(-beta_per);
        let mut refs = Vec::with_capacity(b);
        let mut weights = Vec::with_capacity(b);
        for _ in 0..b {
            let u = rng.random::<f64>() * total;
            let i = self.cdf.partition_point(|&c| c <= u).min(n - 1);
            let p = ((i + 1) as f64).powf(-self.cfg.alpha) / total;
            refs.push(self.order[i]);
            weights.push((n as f64 * p).powf(-beta_per) / w_max);
        }
        (refs, weights)
    }

    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        w.f64(self.cfg.alpha);
        w.f64(self.cfg.beta0);
        w.bool(self.stale);
        w.usize(self.order.len());
        for r in &self.order {
            w.u64(r.episode);
            w.usize(r.step);
        }
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let cfg = PerConfig {
            alpha: r.f64()?,
            beta0: r.f64()?,
        };
        let stale = r.bool()?;
        let n = r.usize()?;
        let mut items = Vec::with_capacity(n);
        for _ in 0..n {
            items.push(StepRef {
                episode: r.u64()?,
                step: r.usize()?,
            });
        }
        let mut idx = Self::new(cfg);
        let mut acc = 0.0;
        idx.cdf = (1..=n)
            .map(|k| {
                acc += (k as f64).powf(-cfg.alpha);
                acc
            })
            .collect();
        idx.order = items;
        idx.stale = stale;
        Ok(idx)
    }
}
