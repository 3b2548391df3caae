//! Built-in continuous-control tasks.

mod pendulum;
mod pointmass;

pub use pendulum::Pendulum;
pub use pointmass::PointMass;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::codec::{ByteReader, ByteWriter};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_lower: Vec<f64>,
    pub action_upper: Vec<f64>,
    pub max_episode_steps: usize,
}

/// `a' = a (upper - lower) / 2`, clamped to the bounds.
pub fn action_rescale(spec: &EnvSpec, action: &[f64]) -> Vec<f64> {
    action
        .iter()
        .zip(spec.action_lower.iter().zip(&spec.action_upper))
        .map(|(a, (lo, hi))| (a * (hi - lo) / 2.0).clamp(*lo, *hi))
        .collect()
}

/// How an observation relates to the end of its episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Terminal,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Pendulum,
    Pointmass,
}

impl EnvId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pendulum" => Some(EnvId::Pendulum),
            "pointmass" | "point-mass" | "point_mass" => Some(EnvId::Pointmass),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvId::Pendulum => "pendulum",
            EnvId::Pointmass => "pointmass",
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvId::Pendulum => pendulum::spec(),
            EnvId::Pointmass => pointmass::spec(),
        }
    }

    pub fn make(self) -> Env {
        match self {
            EnvId::Pendulum => Env::Pendulum(Pendulum::default()),
            EnvId::Pointmass => Env::PointMass(PointMass::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Pendulum(Pendulum),
    PointMass(PointMass),
}

impl Env {
    pub fn id(&self) -> EnvId {
        match self {
            Env::Pendulum(_) => EnvId::Pendulum,
            Env::PointMass(_) => EnvId::Pointmass,
        }
    }

    pub fn spec(&self) -> EnvSpec {
        self.id().spec()
    }

    /// Start a new episode; returns the first observation.
    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Env::Pendulum(e) => e.reset(rng),
            Env::PointMass(e) => e.reset(rng),
        }
    }

    /// Apply an environment-scale action.
    pub fn step(&mut self, action: &[f64]) -> (Vec<f64>, f64, Status) {
        match self {
            Env::Pendulum(e) => e.step(action[0]),
            Env::PointMass(e) => e.step([action[0], action[1]]),
        }
    }

    pub fn observe(&self) -> Vec<f64> {
        match self {
            Env::Pendulum(e) => e.observe(),
            Env::PointMass(e) => e.observe(),
        }
    }

    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        match self {
            Env::Pendulum(e) => {
                w.u8(0);
                w.raw_f64s(&[e.theta, e.theta_dot]);
                w.usize(e.steps);
            }
            Env::PointMass(e) => {
                w.u8(1);
                w.raw_f64s(&[e.x[0], e.x[1], e.v[0], e.v[1]]);
                w.usize(e.steps);
            }
        }
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        match r.u8()? {
            0 => {
                let s = r.raw_f64s(2)?;
                Ok(Env::Pendulum(Pendulum {
                    theta: s[0],
                    theta_dot: s[1],
                    steps: r.usize()?,
                }))
            }
            1 => {
                let s = r.raw_f64s(4)?;
                Ok(Env::PointMass(PointMass {
                    x: [s[0], s[1]],
                    v: [s[2], s[3]],
                    steps: r.usize()?,
                }))
            }
            t => Err(Error::Checkpoint(format!("unknown environment tag {t}"))),
        }
    }
}
