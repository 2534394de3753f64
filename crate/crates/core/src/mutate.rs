//! The mutation operator: adaptive-KL PPO or A2C updates on each population
//! member, with optional sharing of rollout batches across KL-similar
//! policies via importance ratios.
//!
//! The surrogate's ratio term is averaged over the concatenation of all
//! batches in the update (so sharing across identical policies is exactly
//! the single-big-batch update), while the KL penalty is taken over the
//! policy's own batch only.

use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{Algo, GpoConfig};
use crate::env::make_env;
use crate::error::{GpoError, Result};
use crate::nn::adam::AdamState;
use crate::nn::dist::{gauss_kl, gauss_kl_grad_wrt_q, DiagGaussian};
use crate::nn::policy::GaussianPolicy;
use crate::population::Population;
use crate::rng::{self, Stream};
use crate::rollout::{advantages_opts, collect, fit_critic, normalize_in_place, Batch};

/// Adaptive KL-penalty state.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoState {
    pub beta: f64,
    pub d_targ: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl PpoState {
    pub fn new(beta: f64, d_targ: f64, beta_min: f64, beta_max: f64) -> Self {
        assert!(beta_min > 0.0 && beta_min <= beta && beta <= beta_max);
        assert!(d_targ > 0.0);
        PpoState {
            beta,
            d_targ,
            beta_min,
            beta_max,
        }
    }

    /// Double beta when the observed KL overshoots 1.5x the target, halve it
    /// below target/1.5; always clamped to the configured bounds.
    pub fn adapt(&mut self, observed_kl: f64) {
        if observed_kl > 1.5 * self.d_targ {
            self.beta = (self.beta * 2.0).min(self.beta_max);
        } else if observed_kl < self.d_targ / 1.5 {
            self.beta = (self.beta / 2.0).max(self.beta_min);
        }
    }
}

/// One batch participating in an update, with its advantage estimates
/// aligned to `batch.steps()` order.
pub struct BatchAdv<'a> {
    pub batch: &'a Batch,
    pub adv: Vec<f64>,
}

/// Standardize advantages jointly across all batches of an update, in
/// concatenation order.
pub fn normalize_advantages_union(lists: &mut [BatchAdv<'_>]) {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.adv.iter().copied()).collect();
    normalize_in_place(&mut all);
    let mut k = 0;
    for l in lists.iter_mut() {
        for a in l.adv.iter_mut() {
            *a = all[k];
            k += 1;
        }
    }
}

/// Surrogate objective (to be maximized) and its ascent gradient.
///
/// loss = mean over all transitions of ratio * advantage
///      - beta * mean over the own batch (lists[0]) of KL(old || current)
///
/// where ratio = pi_theta(a|s) / pi_old(a|s) against each batch's behavior
/// distribution. With a single own batch and beta = 0 this is the plain
/// importance-weighted policy-gradient objective.
pub fn pg_loss_and_grad(
    policy: &GaussianPolicy,
    lists: &[BatchAdv<'_>],
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    if lists.is_empty() {
        return Err(GpoError::EmptyBatchList("policy update"));
    }
    let net_count = policy.mean_net.param_count();
    let act_dim = policy.act_dim();
    let total: usize = lists.iter().map(|l| l.batch.transition_count()).sum();
    let n_own = lists[0].batch.transition_count();
    let std: Vec<f64> = policy.log_std.iter().map(|l| l.exp()).collect();

    let mut grad = vec![0.0; policy.param_count()];
    let mut loss = 0.0;
    let mut upstream = vec![0.0; act_dim];

    for (li, l) in lists.iter().enumerate() {
        debug_assert_eq!(l.adv.len(), l.batch.transition_count());
        let mut k = 0;
        for step in l.batch.steps() {
            let acts = policy.mean_net.forward_cached(&step.obs)?;
            let dist = DiagGaussian::new(acts.last().unwrap().clone(), std.clone());
            let ratio = (dist.log_prob(&step.action) - step.log_prob).exp();
            let coef = ratio * l.adv[k] / total as f64;
            k += 1;
            loss += coef;
            let (d_mean, d_log_std) = dist.log_prob_grad(&step.action);
            for d in 0..act_dim {
                upstream[d] = coef * d_mean[d];
                grad[net_count + d] += coef * d_log_std[d];
            }
            if li == 0 && beta != 0.0 {
                let old = DiagGaussian::new(step.mean.clone(), step.std.clone());
                loss -= beta * gauss_kl(&old, &dist) / n_own as f64;
                let (km, kls) = gauss_kl_grad_wrt_q(&old, &dist);
                let c = -beta / n_own as f64;
                for d in 0..act_dim {
                    upstream[d] += c * km[d];
                    grad[net_count + d] += c * kls[d];
                }
            }
            policy.mean_net.backward_acc(&acts, &upstream, &mut grad[..net_count]);
        }
    }
    Ok((loss, grad))
}

/// Plain score-function policy gradient (ascent direction) over one batch:
/// mean of advantage * grad log pi(a|s). The importance-weighted form above
/// reduces to this when evaluated at the batch's own behavior parameters.
pub fn score_function_gradient(policy: &GaussianPolicy, own: &BatchAdv<'_>) -> Result<Vec<f64>> {
    let net_count = policy.mean_net.param_count();
    let act_dim = policy.act_dim();
    let n = own.batch.transition_count();
    let std: Vec<f64> = policy.log_std.iter().map(|l| l.exp()).collect();
    let mut grad = vec![0.0; policy.param_count()];
    let mut upstream = vec![0.0; act_dim];
    let mut k = 0;
    for step in own.batch.steps() {
        let acts = policy.mean_net.forward_cached(&step.obs)?;
        let dist = DiagGaussian::new(acts.last().unwrap().clone(), std.clone());
        let coef = own.adv[k] / n as f64;
        k += 1;
        let (d_mean, d_log_std) = dist.log_prob_grad(&step.action);
        for d in 0..act_dim {
            upstream[d] = coef * d_mean[d];
            grad[net_count + d] += coef * d_log_std[d];
        }
        policy.mean_net.backward_acc(&acts, &upstream, &mut grad[..net_count]);
    }
    Ok(grad)
}

/// Mean KL(behavior || current) over a batch's states, against the
/// distributions stored at collection time.
pub fn mean_kl_to_snapshot(policy: &GaussianPolicy, batch: &Batch) -> Result<f64> {
    let std: Vec<f64> = policy.log_std.iter().map(|l| l.exp()).collect();
    let mut sum = 0.0;
    for step in batch.steps() {
        let mean = policy.mean_net.forward(&step.obs)?;
        let current = DiagGaussian::new(mean, std.clone());
        let old = DiagGaussian::new(step.mean.clone(), step.std.clone());
        sum += gauss_kl(&old, &current);
    }
    Ok(sum / batch.transition_count() as f64)
}

fn check_finite(grad: &[f64], what: &'static str) -> Result<()> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(GpoError::NonFinite(what));
    }
    Ok(())
}

/// `epochs` full-batch ascent steps on the adaptive-KL surrogate, then the
/// penalty weight is adapted from the observed KL over the own batch.
/// Returns that mean KL.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    adam: &mut AdamState,
    lists: &[BatchAdv<'_>],
    ppo: &mut PpoState,
    epochs: usize,
) -> Result<f64> {
    if lists.is_empty() {
        return Err(GpoError::EmptyBatchList("ppo_update"));
    }
    for _ in 0..epochs {
        let (_, grad) = pg_loss_and_grad(policy, lists, ppo.beta)?;
        check_finite(&grad, "ppo gradient")?;
        descend(policy, adam, &grad);
    }
    let mean_kl = mean_kl_to_snapshot(policy, lists[0].batch)?;
    ppo.adapt(mean_kl);
    Ok(mean_kl)
}

/// A single ascent step on the importance-weighted policy gradient.
pub fn a2c_update(
    policy: &mut GaussianPolicy,
    adam: &mut AdamState,
    lists: &[BatchAdv<'_>],
) -> Result<()> {
    if lists.is_empty() {
        return Err(GpoError::EmptyBatchList("a2c_update"));
    }
    let (_, grad) = pg_loss_and_grad(policy, lists, 0.0)?;
    check_finite(&grad, "a2c gradient")?;
    descend(policy, adam, &grad);
    Ok(())
}

fn descend(policy: &mut GaussianPolicy, adam: &mut AdamState, ascent_grad: &[f64]) {
    let mut flat = policy.flatten();
    let neg: Vec<f64> = ascent_grad.iter().map(|g| -g).collect();
    adam.step(&mut flat, &neg);
    policy.load_flat(&flat);
}

/// For each policy i, the indices j whose estimated KL[pi_i, pi_j] over
/// policy i's probe states is below epsilon (always including i itself).
/// Sets need not be symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySets {
    sets: Vec<Vec<usize>>,
}

impl SimilaritySets {
    pub fn singletons(m: usize) -> Self {
        SimilaritySets {
            sets: (0..m).map(|i| vec![i]).collect(),
        }
    }

    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Estimate pairwise KL on each policy's own probe states and threshold.
pub fn similarity_sets(
    policies: &[&GaussianPolicy],
    probes: &[&Batch],
    epsilon: f64,
) -> Result<SimilaritySets> {
    assert_eq!(policies.len(), probes.len());
    let m = policies.len();
    let mut sets = Vec::with_capacity(m);
    for i in 0..m {
        let mut set = vec![i];
        for j in 0..m {
            if j == i {
                continue;
            }
            let mut sum = 0.0;
            for step in probes[i].steps() {
                let di = policies[i].dist(&step.obs)?;
                let dj = policies[j].dist(&step.obs)?;
                sum += gauss_kl(&di, &dj);
            }
            let kl = sum / probes[i].transition_count() as f64;
            if kl < epsilon {
                set.push(j);
            }
        }
        set.sort_unstable();
        sets.push(set);
    }
    Ok(SimilaritySets { sets })
}

/// Per-policy log record for one mutation round.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationRow {
    pub round: usize,
    pub policy_id: usize,
    pub mean_return: f64,
    pub std_error: f64,
    pub mean_kl: f64,
    pub beta: f64,
    pub shared_with: usize,
    pub transitions: u64,
    /// Policy-gradient update calls this round (collect iterations).
    pub updates: usize,
}

/// One mutation round over the whole population.
///
/// Iterations are synchronized across the population: every policy collects
/// a fresh batch and refits its critic (in parallel), then every policy
/// updates (in parallel) on its own batch plus, with sharing enabled, the
/// batches just collected by the policies in its similarity set. Similarity
/// sets are computed once from the previous round's cached rollouts, before
/// any mutation. A policy stops collecting once its per-round transition
/// allowance (mut_iters * batch) is spent; its final batch is cached for
/// selection and crossover.
pub fn mutate_population(
    pop: &mut Population,
    cfg: &GpoConfig,
    round: usize,
) -> Result<Vec<MutationRow>> {
    mutate_population_with(pop, cfg, round, cfg.mutation_allowance())
}

/// [`mutate_population`] with an explicit per-policy transition allowance
/// (the equal-budget baselines spend their crossover share here).
pub fn mutate_population_with(
    pop: &mut Population,
    cfg: &GpoConfig,
    round: usize,
    allowance: u64,
) -> Result<Vec<MutationRow>> {
    let m = pop.size();
    let caches: Vec<Option<Arc<Batch>>> = pop.members.iter().map(|x| x.cached.clone()).collect();
    let sets = if cfg.share && m > 1 {
        let have = caches.iter().filter(|c| c.is_some()).count();
        if have == 0 {
            SimilaritySets::singletons(m)
        } else if have < m {
            let missing = caches.iter().position(|c| c.is_none()).unwrap();
            return Err(GpoError::MissingProbe(missing).at(round, missing));
        } else {
            let policies: Vec<&GaussianPolicy> = pop.members.iter().map(|x| &x.policy).collect();
            let probes: Vec<&Batch> = caches.iter().map(|c| c.as_deref().unwrap()).collect();
            similarity_sets(&policies, &probes, cfg.epsilon)?
        }
    } else {
        SimilaritySets::singletons(m)
    };

    let mut envs = Vec::with_capacity(m);
    let mut rngs = Vec::with_capacity(m);
    for i in 0..m {
        envs.push(make_env(&cfg.env, cfg.horizon)?);
        rngs.push(rng::derive(cfg.seed, round, i, Stream::Mutate));
    }
    let mut remaining: Vec<i64> = vec![allowance as i64; m];
    let mut last_batch: Vec<Option<Batch>> = (0..m).map(|_| None).collect();
    let mut mean_kls = vec![f64::NAN; m];
    let mut updates = vec![0usize; m];

    while remaining.iter().any(|&r| r > 0) {
        // Collection phase: fresh batches and critic fits, in parallel.
        let fresh: Vec<Option<Batch>> = pop
            .members
            .par_iter_mut()
            .zip(envs.par_iter_mut())
            .zip(rngs.par_iter_mut())
            .enumerate()
            .map(|(i, ((member, env), rng))| -> Result<Option<Batch>> {
                if remaining[i] <= 0 {
                    return Ok(None);
                }
                let want = (cfg.batch as i64).min(remaining[i]).max(1) as usize;
                let batch = collect(&member.policy, env.as_mut(), want, i, rng)
                    .map_err(|e| e.at(round, i))?;
                let critic_epochs = if member.critic_fitted {
                    cfg.critic_epochs
                } else {
                    cfg.critic_warmup_epochs.max(cfg.critic_epochs)
                };
                fit_critic(
                    &mut member.critic,
                    &batch,
                    cfg.gamma,
                    critic_epochs,
                    cfg.critic_minibatch,
                    cfg.critic_lr,
                    cfg.bootstrap,
                    rng,
                )
                .map_err(|e| e.at(round, i))?;
                member.critic_fitted = true;
                Ok(Some(batch))
            })
            .collect::<Result<_>>()?;

        // Update phase: each policy sees its own fresh batch plus the fresh
        // batches of its similarity set.
        let kls: Vec<Option<f64>> = pop
            .members
            .par_iter_mut()
            .enumerate()
            .map(|(i, member)| -> Result<Option<f64>> {
                let own = match &fresh[i] {
                    Some(b) => b,
                    None => return Ok(None),
                };
                let mut lists = Vec::new();
                lists.push(BatchAdv {
                    batch: own,
                    adv: advantages_opts(own, &member.critic, cfg.gamma, false, cfg.bootstrap)
                        .map_err(|e| e.at(round, i))?,
                });
                for &j in sets.set(i) {
                    if j == i {
                        continue;
                    }
                    if let Some(sb) = &fresh[j] {
                        lists.push(BatchAdv {
                            batch: sb,
                            adv: advantages_opts(
                                sb,
                                &member.critic,
                                cfg.gamma,
                                false,
                                cfg.bootstrap,
                            )
                            .map_err(|e| e.at(round, i))?,
                        });
                    }
                }
                if cfg.normalize_adv {
                    normalize_advantages_union(&mut lists);
                }
                let kl = match cfg.algo {
                    Algo::Ppo => ppo_update(
                        &mut member.policy,
                        &mut member.policy_adam,
                        &lists,
                        &mut member.ppo,
                        cfg.ppo_epochs,
                    )
                    .map_err(|e| e.at(round, i))?,
                    Algo::A2c => {
                        a2c_update(&mut member.policy, &mut member.policy_adam, &lists)
                            .map_err(|e| e.at(round, i))?;
                        mean_kl_to_snapshot(&member.policy, own).map_err(|e| e.at(round, i))?
                    }
                };
                Ok(Some(kl))
            })
            .collect::<Result<_>>()?;

        for (i, batch) in fresh.into_iter().enumerate() {
            if let Some(batch) = batch {
                remaining[i] -= batch.transition_count() as i64;
                updates[i] += 1;
                last_batch[i] = Some(batch);
            }
            if let Some(Some(kl)) = kls.get(i) {
                mean_kls[i] = *kl;
            }
        }
    }

    let mut rows = Vec::with_capacity(m);
    for (i, member) in pop.members.iter_mut().enumerate() {
        let batch = last_batch[i].take().expect("allowance is positive");
        rows.push(MutationRow {
            round,
            policy_id: i,
            mean_return: batch.mean_return(),
            std_error: batch.return_std_error(),
            mean_kl: mean_kls[i],
            beta: member.ppo.beta,
            shared_with: sets.set(i).len() - 1,
            transitions: envs[i].steps_taken(),
            updates: updates[i],
        });
        member.cached = Some(Arc::new(batch));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::MlpParams;
    use crate::rollout::{StepRecord, Trajectory};
    use rand::Rng;

    fn small_policy(sizes: &[usize], seed: u64) -> GaussianPolicy {
        let mut r = rng::derive(seed, 0, 0, Stream::PolicyInit);
        GaussianPolicy::init(sizes, &mut r)
    }

    /// Fabricate a batch of `n` transitions sampled from `policy` at random
    /// observations (no environment involved).
    fn synthetic_batch(policy: &GaussianPolicy, n: usize, seed: u64) -> Batch {
        let mut r = rng::derive(seed, 0, 0, Stream::Eval);
        let steps = (0..n)
            .map(|_| {
                let obs: Vec<f64> = (0..policy.obs_dim())
                    .map(|_| r.random_range(-1.5..=1.5))
                    .collect();
                let dist = policy.dist(&obs).unwrap();
                let action = dist.sample(&mut r);
                let log_prob = dist.log_prob(&action);
                StepRecord {
                    obs,
                    action,
                    reward: 0.0,
                    log_prob,
                    mean: dist.mean,
                    std: dist.std,
                }
            })
            .collect::<Vec<_>>();
        Batch {
            trajectories: vec![Trajectory {
                final_obs: steps.last().unwrap().obs.clone(),
                steps,
                terminal: true,
                total_return: 0.0,
            }],
            policy_id: 0,
            snapshot: policy.flatten(),
        }
    }

    fn random_adv(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::derive(seed, 0, 1, Stream::Eval);
        (0..n).map(|_| r.random_range(-1.5..=1.5)).collect()
    }

    #[test]
    fn at_old_parameters_ratios_are_one_and_penalty_zero() {
        let policy = small_policy(&[3, 6, 2], 1);
        let batch = synthetic_batch(&policy, 32, 2);
        let adv = random_adv(32, 3);
        let mean_adv: f64 = adv.iter().sum::<f64>() / 32.0;
        let lists = [BatchAdv { batch: &batch, adv }];
        let (loss_pen, _) = pg_loss_and_grad(&policy, &lists, 1.0).unwrap();
        let (loss_free, _) = pg_loss_and_grad(&policy, &lists, 0.0).unwrap();
        // KL(old || current) is identically zero at the snapshot.
        assert_eq!(loss_pen, loss_free);
        assert!((loss_free - mean_adv).abs() < 1e-12);
    }

    #[test]
    fn zero_advantage_zero_beta_leaves_policy_unchanged() {
        let mut policy = small_policy(&[3, 6, 2], 4);
        let batch = synthetic_batch(&policy, 16, 5);
        let lists = [BatchAdv {
            batch: &batch,
            adv: vec![0.0; 16],
        }];
        let (_, grad) = pg_loss_and_grad(&policy, &lists, 0.0).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
        let before = policy.flatten();
        let mut adam = AdamState::new(policy.param_count(), 3e-4);
        let mut ppo = PpoState::new(0.0000001_f64.max(1e-4), 0.01, 1e-4, 1e4);
        ppo.beta = 0.0; // force the penalty off for this identity check
        ppo.beta_min = 0.0;
        ppo_update(&mut policy, &mut adam, &lists, &mut ppo, 3).unwrap();
        assert_eq!(policy.flatten(), before);
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let sizes = &[3usize, 5, 1];
        let policy = small_policy(sizes, 6);
        let behavior = small_policy(sizes, 7); // off-policy batch: ratios != 1
        let batch = synthetic_batch(&behavior, 24, 8);
        let adv = random_adv(24, 9);
        let beta = 0.7;
        let lists = [BatchAdv { batch: &batch, adv: adv.clone() }];
        let (_, analytic) = pg_loss_and_grad(&policy, &lists, beta).unwrap();

        let flat0 = policy.flatten();
        let h = 1e-5;
        for k in 0..flat0.len() {
            let mut flat = flat0.clone();
            flat[k] += h;
            let p_hi = GaussianPolicy::from_flat(sizes, &flat).unwrap();
            let (hi, _) = pg_loss_and_grad(&p_hi, &lists, beta).unwrap();
            flat[k] = flat0[k] - h;
            let p_lo = GaussianPolicy::from_flat(sizes, &flat).unwrap();
            let (lo, _) = pg_loss_and_grad(&p_lo, &lists, beta).unwrap();
            let fd = (hi - lo) / (2.0 * h);
            let rel = (analytic[k] - fd).abs() / analytic[k].abs().max(fd.abs()).max(1e-4);
            assert!(rel < 1e-4, "component {k}: {} vs {}", analytic[k], fd);
        }
    }

    #[test]
    fn importance_weighted_form_equals_score_function_form_on_policy() {
        let policy = small_policy(&[3, 6, 2], 10);
        let batch = synthetic_batch(&policy, 40, 11);
        let adv = random_adv(40, 12);
        let own = BatchAdv { batch: &batch, adv };
        let (_, ratio_grad) = pg_loss_and_grad(&policy, std::slice::from_ref(&own), 0.0).unwrap();
        let plain_grad = score_function_gradient(&policy, &own).unwrap();
        for (a, b) in ratio_grad.iter().zip(&plain_grad) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn sharing_identical_policies_equals_concatenated_batch() {
        let policy = small_policy(&[3, 6, 2], 13);
        let b1 = synthetic_batch(&policy, 20, 14);
        let b2 = synthetic_batch(&policy, 28, 15);
        let a1 = random_adv(20, 16);
        let a2 = random_adv(28, 17);

        let mut concat = b1.clone();
        concat.trajectories.extend(b2.trajectories.iter().cloned());
        let mut ac = a1.clone();
        ac.extend_from_slice(&a2);

        let shared_lists = [
            BatchAdv { batch: &b1, adv: a1 },
            BatchAdv { batch: &b2, adv: a2 },
        ];
        let concat_lists = [BatchAdv { batch: &concat, adv: ac }];
        let (ls, gs) = pg_loss_and_grad(&policy, &shared_lists, 0.4).unwrap();
        let (lc, gc) = pg_loss_and_grad(&policy, &concat_lists, 0.4).unwrap();
        // The penalty averages over lists[0] in one case and the full concat
        // in the other, but both are exactly zero at the snapshot.
        assert!((ls - lc).abs() <= 1e-10);
        for (a, b) in gs.iter().zip(&gc) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn beta_stays_within_bounds() {
        let mut ppo = PpoState::new(1.0, 0.01, 1e-4, 1e4);
        for _ in 0..100 {
            ppo.adapt(10.0);
            assert!(ppo.beta <= 1e4);
        }
        assert_eq!(ppo.beta, 1e4);
        for _ in 0..100 {
            ppo.adapt(0.0);
            assert!(ppo.beta >= 1e-4);
        }
        assert_eq!(ppo.beta, 1e-4);
    }

    fn constant_mean_policy(bias: f64) -> GaussianPolicy {
        let mut net = MlpParams::zeros(&[1, 1]);
        net.load_flat(&[0.0, bias]);
        GaussianPolicy {
            mean_net: net,
            log_std: vec![0.0],
        }
    }

    #[test]
    fn similarity_thresholding_matches_hand_computed_kl() {
        // Means 0 and 1, std 1 everywhere: per-state KL is exactly 0.5.
        let a = constant_mean_policy(0.0);
        let b = constant_mean_policy(1.0);
        let probe_a = synthetic_batch(&a, 10, 18);
        let probe_b = synthetic_batch(&b, 10, 19);
        let policies = [&a, &b];
        let probes = [&probe_a, &probe_b];
        let wide = similarity_sets(&policies, &probes, 0.6).unwrap();
        assert_eq!(wide.set(0), &[0, 1]);
        assert_eq!(wide.set(1), &[0, 1]);
        let tight = similarity_sets(&policies, &probes, 0.4).unwrap();
        assert_eq!(tight.set(0), &[0]);
        assert_eq!(tight.set(1), &[1]);
    }

    #[test]
    fn identical_policies_form_full_sets_and_zero_epsilon_singletons() {
        let p = constant_mean_policy(0.3);
        let probe = synthetic_batch(&p, 8, 20);
        let policies = [&p, &p, &p];
        let probes = [&probe, &probe, &probe];
        let full = similarity_sets(&policies, &probes, 0.05).unwrap();
        for i in 0..3 {
            assert_eq!(full.set(i), &[0, 1, 2]);
        }
        let none = similarity_sets(&policies, &probes, 0.0).unwrap();
        for i in 0..3 {
            assert_eq!(none.set(i), &[i]);
        }
    }

    fn tiny_cfg() -> GpoConfig {
        let mut cfg = GpoConfig::default();
        cfg.env = "pendulum".into();
        cfg.horizon = 32;
        cfg.batch = 64;
        cfg.mut_iters = 2;
        cfg.pop = 2;
        cfg.critic_epochs = 2;
        cfg.ppo_epochs = 2;
        cfg.seed = 99;
        cfg
    }

    #[test]
    fn mutation_round_is_deterministic() {
        let cfg = tiny_cfg();
        let run = || {
            let mut pop = Population::init(3, 1, &cfg);
            let rows = mutate_population(&mut pop, &cfg, 0).unwrap();
            (pop.members.iter().map(|m| m.policy.flatten()).collect::<Vec<_>>(), rows)
        };
        let (pa, ra) = run();
        let (pb, rb) = run();
        assert_eq!(pa, pb);
        assert_eq!(ra, rb);
    }

    #[test]
    fn population_of_one_ignores_sharing_toggle() {
        let mut cfg = tiny_cfg();
        cfg.pop = 1;
        cfg.share = true;
        let mut pop_on = Population::init(3, 1, &cfg);
        mutate_population(&mut pop_on, &cfg, 0).unwrap();
        mutate_population(&mut pop_on, &cfg, 1).unwrap();
        cfg.share = false;
        let mut pop_off = Population::init(3, 1, &cfg);
        mutate_population(&mut pop_off, &cfg, 0).unwrap();
        mutate_population(&mut pop_off, &cfg, 1).unwrap();
        assert_eq!(
            pop_on.members[0].policy.flatten(),
            pop_off.members[0].policy.flatten()
        );
    }

    #[test]
    fn transitions_are_exact_on_fixed_length_episodes() {
        let cfg = tiny_cfg();
        let mut pop = Population::init(3, 1, &cfg);
        let rows = mutate_population(&mut pop, &cfg, 0).unwrap();
        for row in rows {
            assert_eq!(row.transitions, cfg.mutation_allowance());
        }
    }
}
