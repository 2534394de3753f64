//! Desk-scale continuous-control environments behind one interface.
//!
//! Every instance counts its own `step` calls, so transition accounting in
//! the driver is ground truth rather than bookkeeping.

pub mod pendulum;
pub mod pointnav;

use crate::error::{GpoError, Result};
use crate::rng::Prng;

pub use pendulum::Pendulum;
pub use pointnav::PointNav;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub horizon: usize,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Episode over (terminal state reached or horizon hit).
    pub done: bool,
    /// True only for a terminal state; false when the horizon cut the episode.
    pub terminal: bool,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Draw an initial state from the environment's documented initial
    /// distribution, using only the supplied random source.
    fn reset(&mut self, rng: &mut Prng) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<Step>;

    /// Physical state vector (environment specific).
    fn state_vec(&self) -> Vec<f64>;

    /// Steps taken in the current episode.
    fn elapsed(&self) -> usize;

    /// Total `step` calls over the instance lifetime.
    fn steps_taken(&self) -> u64;
}

/// Construct an environment by its config/CLI name.
pub fn make_env(name: &str, horizon: usize) -> Result<Box<dyn Env>> {
    match name {
        "pointnav" => Ok(Box::new(PointNav::full(horizon))),
        "pointnav:left" => Ok(Box::new(PointNav::left(horizon))),
        "pointnav:right" => Ok(Box::new(PointNav::right(horizon))),
        "pendulum" => Ok(Box::new(Pendulum::new(horizon))),
        other => Err(GpoError::UnknownEnv(other.to_string())),
    }
}

/// True if every episode runs to the horizon (no terminal states).
pub fn fixed_episode_length(name: &str) -> bool {
    name == "pendulum"
}

pub(crate) fn check_action(spec: &EnvSpec, action: &[f64]) -> Result<()> {
    if action.len() != spec.act_dim {
        return Err(GpoError::DimensionMismatch {
            what: "env action",
            expected: spec.act_dim,
            got: action.len(),
        });
    }
    Ok(())
}
