//! Torque-limited pendulum swing-up. The angle is measured from the upright position.

use std::f64::consts::PI;

use rand::Rng as _;

use super::{EnvSpec, Status};
use crate::rng::Rng;

pub const GRAVITY: f64 = 9.81;
pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_STEPS: usize = 200;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        state_dim: 3,
        action_dim: 1,
        action_lower: vec![-MAX_TORQUE],
        action_upper: vec![MAX_TORQUE],
        max_episode_steps: MAX_STEPS,
    }
}

/// Map an angle to `(-pi, pi]`.
pub fn wrap(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI {
        PI
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pendulum {
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: usize,
}

impl Pendulum {
    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        // U(-pi, pi]
        self.theta = PI - 2.0 * PI * rng.random::<f64>();
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.steps = 0;
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    /// Mechanical energy per unit mass, potential measured from the pivot.
    pub fn energy(&self) -> f64 {
        0.5 * self.theta_dot * self.theta_dot + GRAVITY * self.theta.cos()
    }

    /// Semi-implicit Euler step; the reward is evaluated at the pre-step state.
    pub fn step(&mut self, torque: f64) -> (Vec<f64>, f64, Status) {
        let tau = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
        let th = wrap(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * tau * tau);
        self.theta_dot =
            (self.theta_dot + DT * (GRAVITY * self.theta.sin() + tau)).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += DT * self.theta_dot;
        self.steps += 1;
        let status = if self.steps >= MAX_STEPS {
            Status::Truncated
        } else {
            Status::Running
        };
        (self.observe(), reward, status)
    }
}
