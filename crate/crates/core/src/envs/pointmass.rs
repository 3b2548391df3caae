//! Planar double integrator driven toward the origin. Leaving the disc of radius 5 ends the
//! episode with a large penalty.

use rand::Rng as _;

use super::{EnvSpec, Status};
use crate::rng::Rng;

pub const DT: f64 = 0.05;
pub const MAX_FORCE: f64 = 2.0;
pub const MAX_STEPS: usize = 400;
pub const FAIL_RADIUS: f64 = 5.0;
pub const FAIL_REWARD: f64 = -100.0;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        state_dim: 4,
        action_dim: 2,
        action_lower: vec![-MAX_FORCE; 2],
        action_upper: vec![MAX_FORCE; 2],
        max_episode_steps: MAX_STEPS,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointMass {
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub steps: usize,
}

impl PointMass {
    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.v = [0.0; 2];
        self.steps = 0;
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        vec![self.x[0], self.x[1], self.v[0], self.v[1]]
    }

    /// Explicit Euler step; the reward is evaluated at the pre-step position.
    pub fn step(&mut self, force: [f64; 2]) -> (Vec<f64>, f64, Status) {
        let f = force.map(|c| c.clamp(-MAX_FORCE, MAX_FORCE));
        let mut reward = -(self.x[0] * self.x[0] + self.x[1] * self.x[1])
            - 0.01 * (f[0] * f[0] + f[1] * f[1]);
        for i in 0..2 {
            self.x[i] += DT * self.v[i];
            self.v[i] += DT * f[i];
        }
        self.steps += 1;
        let status = if self.x[0].hypot(self.x[1]) > FAIL_RADIUS {
            reward = FAIL_REWARD;
            Status::Terminal
        } else if self.steps >= MAX_STEPS {
            Status::Truncated
        } else {
            Status::Running
        };
        (self.observe(), reward, status)
    }
}
