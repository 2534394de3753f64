//! Trajectory collection, discounted returns, critic fitting and advantage
//! estimation.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::env::Env;
use crate::error::{GpoError, Result};
use crate::nn::adam::AdamState;
use crate::nn::mlp::MlpParams;
use crate::nn::policy::GaussianPolicy;
use crate::rng::Prng;

/// One transition, including the behavior distribution that produced it.
/// Actions are stored unclipped; environments clip internally.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub log_prob: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    /// Ended in a terminal state; false when the horizon cut the episode.
    pub terminal: bool,
    /// Observation after the last step (tail value for optional bootstrap).
    pub final_obs: Vec<f64>,
    /// Total undiscounted return.
    pub total_return: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Whole-episode rollouts from one policy.
#[derive(Debug, Clone)]
pub struct Batch {
    pub trajectories: Vec<Trajectory>,
    pub policy_id: usize,
    /// Flat policy parameters at collection time (the "old" policy of the
    /// surrogate objectives; per-step means/stds are its evaluations).
    pub snapshot: Vec<f64>,
}

impl Batch {
    pub fn transition_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }

    pub fn episode_count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn mean_return(&self) -> f64 {
        let n = self.trajectories.len();
        self.trajectories.iter().map(|t| t.total_return).sum::<f64>() / n as f64
    }

    pub fn return_std_error(&self) -> f64 {
        let n = self.trajectories.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_return();
        let var = self
            .trajectories
            .iter()
            .map(|t| (t.total_return - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.trajectories.iter().flat_map(|t| t.steps.iter())
    }
}

/// Roll whole episodes until at least `min_transitions` transitions are
/// collected. Episodes are never cut except at the environment horizon.
pub fn collect(
    policy: &GaussianPolicy,
    env: &mut dyn Env,
    min_transitions: usize,
    policy_id: usize,
    rng: &mut Prng,
) -> Result<Batch> {
    assert!(min_transitions >= 1);
    let mut trajectories = Vec::new();
    let mut total = 0;
    while total < min_transitions {
        let traj = rollout_episode(policy, env, rng)?;
        total += traj.len();
        trajectories.push(traj);
    }
    Ok(Batch {
        trajectories,
        policy_id,
        snapshot: policy.flatten(),
    })
}

/// Roll exactly `episodes` whole episodes (evaluation helper).
pub fn collect_episodes(
    policy: &GaussianPolicy,
    env: &mut dyn Env,
    episodes: usize,
    policy_id: usize,
    rng: &mut Prng,
) -> Result<Batch> {
    let mut trajectories = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        trajectories.push(rollout_episode(policy, env, rng)?);
    }
    Ok(Batch {
        trajectories,
        policy_id,
        snapshot: policy.flatten(),
    })
}

fn rollout_episode(
    policy: &GaussianPolicy,
    env: &mut dyn Env,
    rng: &mut Prng,
) -> Result<Trajectory> {
    let mut obs = env.reset(rng);
    let mut steps = Vec::new();
    let mut total_return = 0.0;
    loop {
        let dist = policy.dist(&obs)?;
        let action = dist.sample(rng);
        let log_prob = dist.log_prob(&action);
        let step = env.step(&action)?;
        total_return += step.reward;
        steps.push(StepRecord {
            obs,
            action,
            reward: step.reward,
            log_prob,
            mean: dist.mean,
            std: dist.std,
        });
        obs = step.obs;
        if step.done {
            return Ok(Trajectory {
                steps,
                terminal: step.terminal,
                final_obs: obs,
                total_return,
            });
        }
    }
}

/// Drive `act` in the environment for exactly `n` transitions, resetting on
/// episode end and cutting the final episode mid-flight. Used for imitation
/// data, where visited states matter and returns do not.
pub fn collect_states(
    mut act: impl FnMut(&[f64], &mut Prng) -> Result<Vec<f64>>,
    env: &mut dyn Env,
    n: usize,
    rng: &mut Prng,
) -> Result<Vec<Vec<f64>>> {
    let mut states = Vec::with_capacity(n);
    let mut obs = env.reset(rng);
    while states.len() < n {
        let action = act(&obs, rng)?;
        let step = env.step(&action)?;
        states.push(std::mem::replace(&mut obs, step.obs));
        if step.done && states.len() < n {
            obs = env.reset(rng);
        }
    }
    Ok(states)
}

/// Discounted suffix sums: R_t = r_t + gamma * R_{t+1}, with R beyond the
/// end equal to `tail`.
pub fn discounted_returns(rewards: &[f64], gamma: f64, tail: f64) -> Vec<f64> {
    assert!(gamma > 0.0 && gamma <= 1.0);
    let mut out = vec![0.0; rewards.len()];
    let mut acc = tail;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Per-step discounted returns of a trajectory (zero tail: horizon-cut
/// episodes are treated as terminal).
pub fn returns(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
    discounted_returns(&rewards, gamma, 0.0)
}

fn trajectory_targets(
    traj: &Trajectory,
    critic: &MlpParams,
    gamma: f64,
    bootstrap_truncated: bool,
) -> Result<Vec<f64>> {
    let tail = if bootstrap_truncated && !traj.terminal {
        critic.forward(&traj.final_obs)?[0]
    } else {
        0.0
    };
    let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
    Ok(discounted_returns(&rewards, gamma, tail))
}

/// Mean squared error between critic predictions and discounted returns.
pub fn critic_mse(
    critic: &MlpParams,
    batch: &Batch,
    gamma: f64,
    bootstrap_truncated: bool,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0;
    for traj in &batch.trajectories {
        let targets = trajectory_targets(traj, critic, gamma, bootstrap_truncated)?;
        for (step, target) in traj.steps.iter().zip(&targets) {
            let v = critic.forward(&step.obs)?[0];
            sum += (v - target).powi(2);
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// Fit the critic to discounted returns with minibatch Adam. Targets are
/// computed once from the incoming critic.
#[allow(clippy::too_many_arguments)]
pub fn fit_critic(
    critic: &mut MlpParams,
    batch: &Batch,
    gamma: f64,
    epochs: usize,
    minibatch: usize,
    lr: f64,
    bootstrap_truncated: bool,
    rng: &mut Prng,
) -> Result<()> {
    if batch.trajectories.is_empty() {
        return Err(GpoError::EmptyBatchList("fit_critic"));
    }
    let mut data: Vec<(&[f64], f64)> = Vec::with_capacity(batch.transition_count());
    for traj in &batch.trajectories {
        let targets = trajectory_targets(traj, critic, gamma, bootstrap_truncated)?;
        for (step, target) in traj.steps.iter().zip(targets) {
            data.push((&step.obs, target));
        }
    }
    let mut adam = AdamState::new(critic.param_count(), lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; critic.param_count()];
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(minibatch.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &idx in chunk {
                let (obs, target) = data[idx];
                let acts = critic.forward_cached(obs)?;
                let v = acts.last().unwrap()[0];
                let upstream = [2.0 * (v - target) / chunk.len() as f64];
                critic.backward_acc(&acts, &upstream, &mut grad);
            }
            let mut flat = critic.flatten();
            adam.step(&mut flat, &grad);
            critic.load_flat(&flat);
        }
    }
    Ok(())
}

/// Advantage estimates R_t - V(s_t) for every transition, flattened in
/// trajectory order. With `normalize`, standardized to mean 0 / std 1
/// across the batch (std floor 1e-8).
pub fn advantages(
    batch: &Batch,
    critic: &MlpParams,
    gamma: f64,
    normalize: bool,
) -> Result<Vec<f64>> {
    advantages_opts(batch, critic, gamma, normalize, false)
}

pub fn advantages_opts(
    batch: &Batch,
    critic: &MlpParams,
    gamma: f64,
    normalize: bool,
    bootstrap_truncated: bool,
) -> Result<Vec<f64>> {
    let mut adv = Vec::with_capacity(batch.transition_count());
    for traj in &batch.trajectories {
        let targets = trajectory_targets(traj, critic, gamma, bootstrap_truncated)?;
        for (step, target) in traj.steps.iter().zip(targets) {
            adv.push(target - critic.forward(&step.obs)?[0]);
        }
    }
    if normalize {
        normalize_in_place(&mut adv);
    }
    Ok(adv)
}

/// Standardize to mean 0, std 1 (std floor 1e-8).
pub fn normalize_in_place(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
}

/// Dump a batch as CSV: episode, t, obs..., act..., reward, logp.
pub fn write_batch_csv(path: &Path, batch: &Batch) -> Result<()> {
    let mut out = String::new();
    let obs_dim = batch
        .trajectories
        .first()
        .and_then(|t| t.steps.first())
        .map(|s| s.obs.len())
        .unwrap_or(0);
    let act_dim = batch
        .trajectories
        .first()
        .and_then(|t| t.steps.first())
        .map(|s| s.action.len())
        .unwrap_or(0);
    out.push_str("episode,t");
    for i in 0..obs_dim {
        out.push_str(&format!(",obs_{i}"));
    }
    for i in 0..act_dim {
        out.push_str(&format!(",act_{i}"));
    }
    out.push_str(",reward,logp\n");
    for (ep, traj) in batch.trajectories.iter().enumerate() {
        for (t, step) in traj.steps.iter().enumerate() {
            out.push_str(&format!("{ep},{t}"));
            for v in &step.obs {
                out.push_str(&format!(",{v}"));
            }
            for v in &step.action {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{}\n", step.reward, step.log_prob));
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_env;
    use crate::rng;
    use crate::rng::Stream;
    use rand::Rng;

    fn test_policy(obs: usize, act: usize, seed: u64) -> GaussianPolicy {
        let mut r = rng::derive(seed, 0, 0, Stream::PolicyInit);
        GaussianPolicy::init(&[obs, 8, act], &mut r)
    }

    #[test]
    fn min_one_transition_gives_one_episode() {
        let policy = test_policy(4, 2, 1);
        let mut env = make_env("pointnav", 5).unwrap();
        let mut r = rng::derive(71, 0, 0, Stream::Mutate);
        let batch = collect(&policy, env.as_mut(), 1, 0, &mut r).unwrap();
        assert_eq!(batch.episode_count(), 1);
        assert!(batch.transition_count() <= 5);
    }

    #[test]
    fn fixed_seed_collection_is_identical() {
        let policy = test_policy(4, 2, 2);
        for _ in 0..2 {
            let mut env_a = make_env("pointnav", 64).unwrap();
            let mut env_b = make_env("pointnav", 64).unwrap();
            let a = collect(
                &policy,
                env_a.as_mut(),
                256,
                0,
                &mut rng::derive(72, 0, 0, Stream::Mutate),
            )
            .unwrap();
            let b = collect(
                &policy,
                env_b.as_mut(),
                256,
                0,
                &mut rng::derive(72, 0, 0, Stream::Mutate),
            )
            .unwrap();
            assert_eq!(a.transition_count(), b.transition_count());
            for (sa, sb) in a.steps().zip(b.steps()) {
                assert_eq!(sa.obs, sb.obs);
                assert_eq!(sa.action, sb.action);
                assert!(sa.log_prob.to_bits() == sb.log_prob.to_bits());
            }
        }
    }

    #[test]
    fn transition_count_bounds() {
        let policy = test_policy(3, 1, 3);
        let mut env = make_env("pendulum", 512).unwrap();
        let mut r = rng::derive(73, 0, 0, Stream::Mutate);
        let batch = collect(&policy, env.as_mut(), 2048, 0, &mut r).unwrap();
        // Pendulum has no early termination: exactly 4 episodes of 512.
        assert_eq!(batch.transition_count(), 2048);
        assert!(batch.episode_count() >= 4);
        assert_eq!(batch.transition_count() as u64, env.steps_taken());
    }

    #[test]
    fn stored_log_probs_match_stored_distributions() {
        let policy = test_policy(4, 2, 4);
        let mut env = make_env("pointnav", 32).unwrap();
        let mut r = rng::derive(74, 0, 0, Stream::Mutate);
        let batch = collect(&policy, env.as_mut(), 64, 0, &mut r).unwrap();
        for step in batch.steps() {
            let d = crate::nn::dist::DiagGaussian::new(step.mean.clone(), step.std.clone());
            assert!((d.log_prob(&step.action) - step.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn collect_states_is_exact_and_counts_env_steps() {
        let policy = test_policy(4, 2, 5);
        let mut env = make_env("pointnav", 7).unwrap();
        let mut r = rng::derive(75, 0, 0, Stream::Crossover);
        let states = collect_states(
            |obs, rng| Ok(policy.dist(obs)?.sample(rng)),
            env.as_mut(),
            100,
            &mut r,
        )
        .unwrap();
        assert_eq!(states.len(), 100);
        assert_eq!(env.steps_taken(), 100);
    }

    #[test]
    fn returns_match_hand_computed_values() {
        let r = discounted_returns(&[1.0, 1.0, 1.0], 0.9, 0.0);
        assert!((r[0] - 2.71).abs() < 1e-12);
        assert!((r[1] - 1.9).abs() < 1e-12);
        assert!((r[2] - 1.0).abs() < 1e-12);
        let r = discounted_returns(&[2.0, 3.0], 1.0, 0.0);
        assert_eq!(r, vec![5.0, 3.0]);
    }

    #[test]
    fn returns_match_direct_double_sum() {
        let mut r = rng::derive(76, 0, 0, Stream::Eval);
        for _ in 0..20 {
            let n = r.random_range(1..=40);
            let rewards: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..=2.0)).collect();
            let gamma = r.random_range(0.5..=1.0);
            let fast = discounted_returns(&rewards, gamma, 0.0);
            for t in 0..n {
                let direct: f64 = (t..n)
                    .map(|i| gamma.powi((i - t) as i32) * rewards[i])
                    .sum();
                assert!((fast[t] - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn returns_are_linear_in_rewards() {
        let mut r = rng::derive(77, 0, 0, Stream::Eval);
        for _ in 0..20 {
            let n = 16;
            let r1: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..=1.0)).collect();
            let r2: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..=1.0)).collect();
            let (a, b) = (r.random_range(-2.0..=2.0), r.random_range(-2.0..=2.0));
            let mixed: Vec<f64> = (0..n).map(|i| a * r1[i] + b * r2[i]).collect();
            let lhs = discounted_returns(&mixed, 0.93, 0.0);
            let ra = discounted_returns(&r1, 0.93, 0.0);
            let rb = discounted_returns(&r2, 0.93, 0.0);
            for i in 0..n {
                assert!((lhs[i] - (a * ra[i] + b * rb[i])).abs() < 1e-10);
            }
        }
    }

    fn constant_reward_batch(n_states: usize, reward: f64, seed: u64) -> Batch {
        let mut r = rng::derive(seed, 0, 0, Stream::Eval);
        let trajectories = (0..n_states)
            .map(|_| {
                let obs: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..=1.0)).collect();
                Trajectory {
                    steps: vec![StepRecord {
                        obs: obs.clone(),
                        action: vec![0.0],
                        reward,
                        log_prob: 0.0,
                        mean: vec![0.0],
                        std: vec![1.0],
                    }],
                    terminal: true,
                    final_obs: obs,
                    total_return: reward,
                }
            })
            .collect();
        Batch {
            trajectories,
            policy_id: 0,
            snapshot: vec![],
        }
    }

    #[test]
    fn critic_fits_constant_returns() {
        let batch = constant_reward_batch(100, 2.0, 78);
        let mut critic = MlpParams::init(&[3, 32, 32, 1], &mut rng::derive(78, 0, 1, Stream::CriticInit));
        let mut r = rng::derive(78, 0, 2, Stream::CriticInit);
        fit_critic(&mut critic, &batch, 0.99, 2000, 32, 5e-4, false, &mut r).unwrap();
        for step in batch.steps() {
            let v = critic.forward(&step.obs).unwrap()[0];
            assert!((v - 2.0).abs() < 0.05, "v = {v}");
        }
    }

    #[test]
    fn zero_epochs_leave_critic_unchanged() {
        let batch = constant_reward_batch(10, 1.0, 79);
        let mut critic = MlpParams::init(&[3, 8, 1], &mut rng::derive(79, 0, 1, Stream::CriticInit));
        let before = critic.clone();
        let mut r = rng::derive(79, 0, 2, Stream::CriticInit);
        fit_critic(&mut critic, &batch, 0.99, 0, 64, 5e-4, false, &mut r).unwrap();
        assert_eq!(critic, before);
    }

    #[test]
    fn fitting_never_increases_training_mse() {
        for seed in 0..10u64 {
            let policy = test_policy(4, 2, seed + 100);
            let mut env = make_env("pointnav", 32).unwrap();
            let mut r = rng::derive(seed, 0, 0, Stream::Mutate);
            let batch = collect(&policy, env.as_mut(), 128, 0, &mut r).unwrap();
            let mut critic =
                MlpParams::init(&[4, 32, 32, 1], &mut rng::derive(seed, 0, 1, Stream::CriticInit));
            let before = critic_mse(&critic, &batch, 0.99, false).unwrap();
            fit_critic(&mut critic, &batch, 0.99, 10, 64, 5e-4, false, &mut r).unwrap();
            let after = critic_mse(&critic, &batch, 0.99, false).unwrap();
            assert!(after <= before, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn zero_critic_gives_raw_returns_as_advantages() {
        let batch = constant_reward_batch(5, 1.5, 80);
        let critic = MlpParams::zeros(&[3, 4, 1]);
        let adv = advantages(&batch, &critic, 0.99, false).unwrap();
        assert!(adv.iter().all(|&a| (a - 1.5).abs() < 1e-12));
    }

    #[test]
    fn perfect_critic_gives_zero_advantages() {
        // Single-step episodes with reward 0 and a zero critic: targets are
        // exactly V(s) = 0 everywhere.
        let batch = constant_reward_batch(5, 0.0, 81);
        let critic = MlpParams::zeros(&[3, 4, 1]);
        let adv = advantages(&batch, &critic, 0.99, false).unwrap();
        assert!(adv.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn normalization_standardizes() {
        let policy = test_policy(4, 2, 6);
        let mut env = make_env("pointnav", 16).unwrap();
        let mut r = rng::derive(82, 0, 0, Stream::Mutate);
        let batch = collect(&policy, env.as_mut(), 64, 0, &mut r).unwrap();
        let critic = MlpParams::init(&[4, 8, 1], &mut rng::derive(82, 0, 1, Stream::CriticInit));
        let adv = advantages(&batch, &critic, 0.99, true).unwrap();
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-10);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn batch_csv_has_documented_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("states.csv");
        let batch = constant_reward_batch(3, 1.0, 83);
        write_batch_csv(&path, &batch).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "episode,t,obs_0,obs_1,obs_2,act_0,reward,logp");
        assert_eq!(lines.count(), 3);
    }
}
