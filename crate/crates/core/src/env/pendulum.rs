//! Rigid pendulum swing-up.
//!
//! Semi-implicit Euler integration with dt = 0.05, g = 10, m = l = 1 and
//! torque clipped to [-2, 2]. Angle 0 is upright. The cost is evaluated on
//! the pre-step state and applied torque; angular velocity is clipped to
//! [-8, 8] so rewards stay bounded. Episodes end at the horizon only.
//!
//! Initial distribution: angle uniform on (-pi, pi), velocity uniform on
//! (-1, 1).

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::rng::Prng;

use super::{check_action, Env, EnvSpec, Step};

pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;
const DT: f64 = 0.05;
const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    elapsed: usize,
    steps: u64,
}

impl Pendulum {
    pub fn new(horizon: usize) -> Self {
        Pendulum {
            spec: EnvSpec {
                obs_dim: 3,
                act_dim: 1,
                action_low: vec![-MAX_TORQUE],
                action_high: vec![MAX_TORQUE],
                horizon,
            },
            theta: 0.0,
            theta_dot: 0.0,
            elapsed: 0,
            steps: 0,
        }
    }

    /// Place the pendulum in a specific state (testing hook).
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
    }

    pub fn angle(&self) -> f64 {
        self.theta
    }

    pub fn velocity(&self) -> f64 {
        self.theta_dot
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

/// Map an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut Prng) -> Vec<f64> {
        self.theta = rng.random_range(-PI..PI);
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.elapsed = 0;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        check_action(&self.spec, action)?;
        let u = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let w = wrap_angle(self.theta);
        let reward = -(w * w + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin()
            + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;

        self.elapsed += 1;
        self.steps += 1;
        Ok(Step {
            obs: self.observe(),
            reward,
            done: self.elapsed >= self.spec.horizon,
            terminal: false,
        })
    }

    fn state_vec(&self) -> Vec<f64> {
        vec![self.theta, self.theta_dot]
    }

    fn elapsed(&self) -> usize {
        self.elapsed
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }
}
