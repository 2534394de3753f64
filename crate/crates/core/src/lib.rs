//! Genetic policy optimization: a population of Gaussian MLP policies
//! evolved by policy-gradient mutation, imitation-based state-space
//! crossover, and fitness-driven selection, with equal-budget single-policy
//! and large-batch baselines on built-in continuous-control environments.

pub mod config;
pub mod crossover;
pub mod driver;
pub mod env;
pub mod error;
pub mod mutate;
pub mod nn;
pub mod population;
pub mod report;
pub mod rng;
pub mod rollout;
pub mod select;

pub use error::{GpoError, Result};
pub use rng::Prng;
