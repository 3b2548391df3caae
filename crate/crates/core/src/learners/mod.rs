//! V-RACER, DDPG and NAF batch gradients, the Rule 2 combiner and the optional
//! closed-form advantage heads.
//!
//! Every learner returns gradients of a loss (the direction the optimizer descends),
//! averaged over the batch, together with the per-sample statistics the replay memory
//! needs afterwards (fresh `rho`, values, TD errors).

pub mod advantage;
pub mod combine;
pub mod ddpg;
pub mod naf;
pub mod retrace;
pub mod vracer;

use serde::{Deserialize, Serialize};

use crate::par::Execution;
use crate::policy::GaussianPolicy;
use crate::replay::{classify, Proximity};

/// Replay strategy, including the two single-rule ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Rule 1 and Rule 2.
    Refer,
    /// Rule 1 only.
    Refer1,
    /// Rule 2 only, importance weights capped at 1e3.
    Refer2,
    /// Uniform replay without either rule.
    Er,
    /// Rank-based prioritized replay.
    Per,
}

impl ReplayMode {
    pub fn name(self) -> &'static str {
        match self {
            ReplayMode::Refer => "refer",
            ReplayMode::Refer1 => "refer1",
            ReplayMode::Refer2 => "refer2",
            ReplayMode::Er => "er",
            ReplayMode::Per => "per",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "refer" => ReplayMode::Refer,
            "refer1" => ReplayMode::Refer1,
            "refer2" => ReplayMode::Refer2,
            "er" => ReplayMode::Er,
            "per" => ReplayMode::Per,
            _ => return None,
        })
    }

    pub fn rules(self) -> Rules {
        match self {
            ReplayMode::Refer => Rules {
                clip: true,
                penalty: true,
                rho_cap: f64::INFINITY,
            },
            ReplayMode::Refer1 => Rules {
                clip: true,
                penalty: false,
                rho_cap: f64::INFINITY,
            },
            ReplayMode::Refer2 => Rules {
                clip: false,
                penalty: true,
                rho_cap: 1e3,
            },
            ReplayMode::Er | ReplayMode::Per => Rules {
                clip: false,
                penalty: false,
                rho_cap: f64::INFINITY,
            },
        }
    }

    pub fn is_refer(self) -> bool {
        matches!(self, ReplayMode::Refer | ReplayMode::Refer1 | ReplayMode::Refer2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rules {
    /// Zero the task gradient of far-policy samples.
    pub clip: bool,
    /// Attract the policy toward replayed behaviors with weight `1 - beta`.
    pub penalty: bool,
    pub rho_cap: f64,
}

/// Quantities fixed for one gradient step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    pub c_max: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rules: Rules,
    pub exec: Execution,
}

impl StepContext {
    /// Coefficient of the task gradient; one when the penalty is disabled.
    pub fn task_weight(&self) -> f64 {
        if self.rules.penalty {
            self.beta
        } else {
            1.0
        }
    }

    pub fn penalty_weight(&self) -> f64 {
        1.0 - self.task_weight()
    }

    pub fn capped(&self, rho: f64) -> f64 {
        rho.min(self.rules.rho_cap)
    }

    /// Whether the task gradient of a sample with weight `rho` is kept.
    pub fn keeps(&self, rho: f64) -> bool {
        !self.rules.clip || classify(rho, self.c_max) == Proximity::Near
    }
}

/// One replayed transition, already standardized and reward-scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub behavior: GaussianPolicy,
    /// Scaled reward `r_{t+1} / (sigma_r + eps)`.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_terminal: bool,
    /// Stored return target (V-RACER).
    pub qret: f64,
    /// Importance-correction weight of prioritized sampling, else one.
    pub weight: f64,
}

/// Fresh per-sample estimates produced while computing a gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleStats {
    pub rho: f64,
    pub near: bool,
    /// State value at the sample.
    pub value: f64,
    /// Action value used by the trace correction.
    pub q_value: f64,
    pub td_error: f64,
    pub kl: f64,
}

fn check_finite(what: &str, g: &[f64]) -> crate::Result<()> {
    match g.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(crate::Error::NonFinite(format!("{what} gradient component {i}"))),
        None => Ok(()),
    }
}

/// Stack rows of equal length into a matrix.
fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> ndarray::Array2<f64> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), width);
        data.extend_from_slice(r);
        n += 1;
    }
    ndarray::Array2::from_shape_vec((n, width), data).expect("row widths")
}

/// Sum chunk gradients in chunk order.
fn sum_in_order(len: usize, parts: &[Vec<f64>]) -> Vec<f64> {
    let mut g = vec![0.0; len];
    for p in parts {
        g.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    g
}
