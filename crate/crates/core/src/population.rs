//! The policy ensemble: each member carries its policy, critic, optimizer
//! and adaptive-penalty state, plus the rollout batch cached from its last
//! mutation phase (reused by selection, crossover, and data sharing).

use std::sync::Arc;

use crate::config::GpoConfig;
use crate::mutate::PpoState;
use crate::nn::adam::AdamState;
use crate::nn::mlp::MlpParams;
use crate::nn::policy::GaussianPolicy;
use crate::rng::{self, Stream};
use crate::rollout::Batch;

/// Hidden layer widths for the policy mean network.
pub const POLICY_HIDDEN: [usize; 2] = [64, 64];
/// Hidden layer widths for the value-function critic.
pub const CRITIC_HIDDEN: [usize; 2] = [32, 32];

pub fn policy_layer_sizes(obs_dim: usize, act_dim: usize) -> Vec<usize> {
    vec![obs_dim, POLICY_HIDDEN[0], POLICY_HIDDEN[1], act_dim]
}

pub fn critic_layer_sizes(obs_dim: usize) -> Vec<usize> {
    vec![obs_dim, CRITIC_HIDDEN[0], CRITIC_HIDDEN[1], 1]
}

#[derive(Debug, Clone)]
pub struct Individual {
    pub policy: GaussianPolicy,
    pub critic: MlpParams,
    /// False until the critic has been fitted once; a freshly initialized
    /// critic gets a longer warmup fit on its first batch.
    pub critic_fitted: bool,
    pub policy_adam: AdamState,
    pub ppo: PpoState,
    /// Final batch from the most recent mutation phase.
    pub cached: Option<Arc<Batch>>,
}

impl Individual {
    /// Fresh member: random policy and critic, clean optimizer state.
    pub fn fresh(
        obs_dim: usize,
        act_dim: usize,
        cfg: &GpoConfig,
        round: usize,
        index: usize,
    ) -> Self {
        let mut policy_rng = rng::derive(cfg.seed, round, index, Stream::PolicyInit);
        let mut critic_rng = rng::derive(cfg.seed, round, index, Stream::CriticInit);
        let policy = GaussianPolicy::init(&policy_layer_sizes(obs_dim, act_dim), &mut policy_rng);
        let param_count = policy.param_count();
        Individual {
            policy,
            critic: MlpParams::init(&critic_layer_sizes(obs_dim), &mut critic_rng),
            critic_fitted: false,
            policy_adam: AdamState::new(param_count, cfg.lr),
            ppo: PpoState::new(cfg.beta_init, cfg.d_targ, cfg.beta_min, cfg.beta_max),
            cached: None,
        }
    }

    /// Child member: given policy parameters and a fresh critic. The probe
    /// batch, adaptive-penalty state and optimizer moments carry over from
    /// the parent the child's parameters derive from.
    pub fn child(
        policy: GaussianPolicy,
        parent: &Individual,
        obs_dim: usize,
        cfg: &GpoConfig,
        round: usize,
        index: usize,
    ) -> Self {
        let mut critic_rng = rng::derive(cfg.seed, round, index, Stream::CriticInit);
        Individual {
            policy,
            critic: MlpParams::init(&critic_layer_sizes(obs_dim), &mut critic_rng),
            critic_fitted: false,
            policy_adam: parent.policy_adam.clone(),
            ppo: parent.ppo.clone(),
            cached: parent.cached.clone(),
        }
    }

    pub fn mean_return(&self) -> f64 {
        self.cached.as_ref().map(|b| b.mean_return()).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<Individual>,
}

impl Population {
    /// m members initialized with distinct random streams.
    pub fn init(obs_dim: usize, act_dim: usize, cfg: &GpoConfig) -> Self {
        let members = (0..cfg.pop)
            .map(|i| Individual::fresh(obs_dim, act_dim, cfg, 0, i))
            .collect();
        Population { members }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn mean_returns(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.mean_return()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_start_distinct() {
        let cfg = GpoConfig::default();
        let pop = Population::init(4, 2, &cfg);
        assert_eq!(pop.size(), 4);
        let a = pop.members[0].policy.flatten();
        let b = pop.members[1].policy.flatten();
        assert_ne!(a, b);
    }

    #[test]
    fn log_std_starts_at_zero() {
        let cfg = GpoConfig::default();
        let pop = Population::init(4, 2, &cfg);
        assert!(pop.members[0].policy.log_std.iter().all(|&l| l == 0.0));
    }
}
