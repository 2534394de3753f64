//! State-space crossover: train a binary selector over states from the two
//! parents' cached rollouts, form the two-level gated policy, and distill it
//! into a child network by imitation with dataset aggregation. The
//! parameter-space crossover baselines (best-parent copy, random layer swap)
//! live here too.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::GpoConfig;
use crate::env::Env;
use crate::error::{GpoError, Result};
use crate::nn::adam::AdamState;
use crate::nn::dist::{binary_head, gauss_kl, gauss_kl_grad_wrt_p, Binary2, DiagGaussian};
use crate::nn::mlp::MlpParams;
use crate::nn::policy::GaussianPolicy;
use crate::rng::Prng;
use crate::rollout::{collect_states, Batch};

/// The selector is an ordinary MLP with a 2-logit output head.
pub type SelectorParams = MlpParams;

pub const SELECTOR_HIDDEN: [usize; 2] = [32, 32];

pub fn selector_layer_sizes(obs_dim: usize) -> Vec<usize> {
    vec![obs_dim, SELECTOR_HIDDEN[0], SELECTOR_HIDDEN[1], 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParentLabel {
    X,
    Y,
}

/// One state from a kept parent trajectory, weighted by that trajectory's
/// normalized return.
#[derive(Debug, Clone)]
pub struct WeightedState {
    pub state: Vec<f64>,
    pub label: ParentLabel,
    pub weight: f64,
}

#[derive(Debug, Clone, Default)]
pub struct WeightedStateSet {
    pub records: Vec<WeightedState>,
}

impl WeightedStateSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// False when filtering left states from only one parent; such datasets
    /// still train, but the selector degenerates to a constant gate.
    pub fn has_both_labels(&self) -> bool {
        let x = self.records.iter().any(|r| r.label == ParentLabel::X);
        let y = self.records.iter().any(|r| r.label == ParentLabel::Y);
        x && y
    }
}

/// Pool both parents' trajectories, keep the top `keep_fraction` by total
/// return, and weight each kept state by its trajectory's min-max-normalized
/// return (a constant pool gets weight 1 everywhere).
pub fn build_selector_dataset(
    batch_x: &Batch,
    batch_y: &Batch,
    keep_fraction: f64,
) -> Result<WeightedStateSet> {
    let mut pool: Vec<(ParentLabel, &crate::rollout::Trajectory)> = Vec::new();
    for t in &batch_x.trajectories {
        pool.push((ParentLabel::X, t));
    }
    for t in &batch_y.trajectories {
        pool.push((ParentLabel::Y, t));
    }
    if pool.is_empty() {
        return Err(GpoError::EmptyPool);
    }
    // Stable sort keeps the x-then-y order among ties, for determinism.
    pool.sort_by(|a, b| b.1.total_return.partial_cmp(&a.1.total_return).unwrap());
    let keep = ((keep_fraction * pool.len() as f64).ceil() as usize).min(pool.len());
    if keep == 0 {
        return Err(GpoError::EmptyPool);
    }
    let kept = &pool[..keep];
    let r_max = kept.first().unwrap().1.total_return;
    let r_min = kept.last().unwrap().1.total_return;
    let range = r_max - r_min;
    let mut records = Vec::new();
    for (label, traj) in kept {
        let weight = if range > 0.0 {
            (traj.total_return - r_min) / range
        } else {
            1.0
        };
        for step in &traj.steps {
            records.push(WeightedState {
                state: step.obs.clone(),
                label: *label,
                weight,
            });
        }
    }
    if records.is_empty() {
        return Err(GpoError::EmptyPool);
    }
    Ok(WeightedStateSet { records })
}

/// Selector gate probabilities at a state.
pub fn selector_gate(selector: &SelectorParams, state: &[f64]) -> Result<Binary2> {
    let logits = selector.forward(state)?;
    Ok(binary_head([logits[0], logits[1]]))
}

/// Weighted log loss: -mean over the dataset of w * log p(label | state).
pub fn selector_loss(selector: &SelectorParams, dataset: &WeightedStateSet) -> Result<f64> {
    let mut loss = 0.0;
    for r in &dataset.records {
        let gate = selector_gate(selector, &r.state)?;
        let p = match r.label {
            ParentLabel::X => gate.p_x(),
            ParentLabel::Y => 1.0 - gate.p_x(),
        };
        loss -= r.weight * p.ln();
    }
    Ok(loss / dataset.len() as f64)
}

/// Loss and gradient over a subset of records (one minibatch).
fn selector_loss_and_grad(
    selector: &SelectorParams,
    records: &[&WeightedState],
    grad: &mut [f64],
) -> Result<f64> {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n = records.len() as f64;
    let mut loss = 0.0;
    for r in records {
        let acts = selector.forward_cached(&r.state)?;
        let logits = acts.last().unwrap();
        let gate = binary_head([logits[0], logits[1]]);
        let probs = gate.probs();
        let target = match r.label {
            ParentLabel::X => 0,
            ParentLabel::Y => 1,
        };
        loss -= r.weight * probs[target].ln() / n;
        let upstream = [
            r.weight * (probs[0] - if target == 0 { 1.0 } else { 0.0 }) / n,
            r.weight * (probs[1] - if target == 1 { 1.0 } else { 0.0 }) / n,
        ];
        selector.backward_acc(&acts, &upstream, grad);
    }
    Ok(loss)
}

/// Gradient of the full-dataset selector loss (finite-difference hook).
pub fn selector_loss_grad(
    selector: &SelectorParams,
    dataset: &WeightedStateSet,
) -> Result<Vec<f64>> {
    let refs: Vec<&WeightedState> = dataset.records.iter().collect();
    let mut grad = vec![0.0; selector.param_count()];
    selector_loss_and_grad(selector, &refs, &mut grad)?;
    Ok(grad)
}

/// Minibatch Adam on the weighted log loss, starting from `init`.
pub fn train_selector(
    dataset: &WeightedStateSet,
    init: SelectorParams,
    epochs: usize,
    minibatch: usize,
    lr: f64,
    rng: &mut Prng,
) -> Result<SelectorParams> {
    if dataset.is_empty() {
        return Err(GpoError::EmptyPool);
    }
    let mut selector = init;
    let mut adam = AdamState::new(selector.param_count(), lr);
    let mut grad = vec![0.0; selector.param_count()];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(minibatch.max(1)) {
            let records: Vec<&WeightedState> =
                chunk.iter().map(|&i| &dataset.records[i]).collect();
            let loss = selector_loss_and_grad(&selector, &records, &mut grad)?;
            if !loss.is_finite() {
                return Err(GpoError::NonFinite("selector loss"));
            }
            let mut flat = selector.flatten();
            adam.step(&mut flat, &grad);
            selector.load_flat(&flat);
        }
    }
    Ok(selector)
}

/// Fraction of records whose argmax gate matches their label.
pub fn selector_accuracy(selector: &SelectorParams, dataset: &WeightedStateSet) -> Result<f64> {
    let mut hits = 0;
    for r in &dataset.records {
        let gate = selector_gate(selector, &r.state)?;
        let predicted = if gate.p_x() >= 0.5 {
            ParentLabel::X
        } else {
            ParentLabel::Y
        };
        if predicted == r.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}

/// Two-level policy: the selector gates between the parents' action
/// distributions.
pub struct HierarchicalPolicy<'a> {
    pub selector: &'a SelectorParams,
    pub parent_x: &'a GaussianPolicy,
    pub parent_y: &'a GaussianPolicy,
}

impl HierarchicalPolicy<'_> {
    /// Sample a parent from the gate, then sample that parent's Gaussian.
    pub fn act(&self, state: &[f64], rng: &mut Prng) -> Result<Vec<f64>> {
        let gate = selector_gate(self.selector, state)?;
        let parent = if rng.random_bool(gate.p_x()) {
            self.parent_x
        } else {
            self.parent_y
        };
        Ok(parent.dist(state)?.sample(rng))
    }

    /// The imitation target at a state: the Gaussian of the parent the gate
    /// prefers (hard gating keeps the KL closed-form; a tie goes to x).
    pub fn expert_dist(&self, state: &[f64]) -> Result<DiagGaussian> {
        let gate = selector_gate(self.selector, state)?;
        if gate.p_x() >= 0.5 {
            self.parent_x.dist(state)
        } else {
            self.parent_y.dist(state)
        }
    }
}

/// A state with the expert distribution recorded for it.
#[derive(Debug, Clone)]
pub struct DistillExample {
    pub state: Vec<f64>,
    pub target: DiagGaussian,
}

/// Mean closed-form KL(child || target) over a dataset (student first).
pub fn distill_loss(child: &GaussianPolicy, data: &[DistillExample]) -> Result<f64> {
    let std: Vec<f64> = child.log_std.iter().map(|l| l.exp()).collect();
    let mut loss = 0.0;
    for ex in data {
        let mean = child.mean_net.forward(&ex.state)?;
        let dist = DiagGaussian::new(mean, std.clone());
        loss += gauss_kl(&dist, &ex.target);
    }
    Ok(loss / data.len() as f64)
}

/// Gradient of [`distill_loss`] with respect to the child's flat parameters.
pub fn distill_loss_grad(child: &GaussianPolicy, data: &[DistillExample]) -> Result<Vec<f64>> {
    let net_count = child.mean_net.param_count();
    let act_dim = child.act_dim();
    let std: Vec<f64> = child.log_std.iter().map(|l| l.exp()).collect();
    let mut grad = vec![0.0; child.param_count()];
    let n = data.len() as f64;
    let mut upstream = vec![0.0; act_dim];
    for ex in data {
        let acts = child.mean_net.forward_cached(&ex.state)?;
        let dist = DiagGaussian::new(acts.last().unwrap().clone(), std.clone());
        let (d_mean, d_log_std) = gauss_kl_grad_wrt_p(&dist, &ex.target);
        for d in 0..act_dim {
            upstream[d] = d_mean[d] / n;
            grad[net_count + d] += d_log_std[d] / n;
        }
        child.mean_net.backward_acc(&acts, &upstream, &mut grad[..net_count]);
    }
    Ok(grad)
}

fn train_distill(
    child: &mut GaussianPolicy,
    data: &[DistillExample],
    epochs: usize,
    minibatch: usize,
    lr: f64,
    rng: &mut Prng,
) -> Result<()> {
    let mut adam = AdamState::new(child.param_count(), lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(minibatch.max(1)) {
            let slice: Vec<DistillExample> = chunk.iter().map(|&i| data[i].clone()).collect();
            let grad = distill_loss_grad(child, &slice)?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(GpoError::NonFinite("distillation gradient"));
            }
            let mut flat = child.flatten();
            adam.step(&mut flat, &grad);
            child.load_flat(&flat);
        }
    }
    Ok(())
}

/// Sizes of the aggregate dataset over the imitation loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaggerReport {
    pub expert_transitions: usize,
    /// Aggregate dataset size after each iteration's append.
    pub aggregate_sizes: Vec<usize>,
}

/// Imitate the gated expert with dataset aggregation.
///
/// First collects the configured number of expert transitions from the
/// hierarchical policy acting in the environment. Then, per iteration:
/// roll the current child for the configured number of transitions, label
/// every visited state with the expert distribution, append, and run the
/// configured epochs of minibatch Adam on the KL(child || expert) loss.
/// Rollout collectors stop at exact transition counts, so a crossover's
/// simulation cost is exactly expert + per-iteration * iterations.
pub fn dagger_distill(
    h: &HierarchicalPolicy<'_>,
    env: &mut dyn Env,
    child_init: &GaussianPolicy,
    cfg: &GpoConfig,
    rng: &mut Prng,
) -> Result<(GaussianPolicy, DaggerReport)> {
    let mut child = child_init.clone();
    let mut data: Vec<DistillExample> = Vec::new();
    if cfg.dagger_expert > 0 {
        let states = collect_states(|s, r| h.act(s, r), env, cfg.dagger_expert, rng)?;
        for state in states {
            let target = h.expert_dist(&state)?;
            data.push(DistillExample { state, target });
        }
    }
    let mut report = DaggerReport {
        expert_transitions: data.len(),
        aggregate_sizes: Vec::with_capacity(cfg.dagger_iters),
    };
    for _ in 0..cfg.dagger_iters {
        if cfg.dagger_student > 0 {
            let states = collect_states(
                |s, r| Ok(child.dist(s)?.sample(r)),
                env,
                cfg.dagger_student,
                rng,
            )?;
            for state in states {
                let target = h.expert_dist(&state)?;
                data.push(DistillExample { state, target });
            }
        }
        report.aggregate_sizes.push(data.len());
        if !data.is_empty() {
            train_distill(
                &mut child,
                &data,
                cfg.dagger_epochs,
                cfg.dagger_minibatch,
                cfg.dagger_lr,
                rng,
            )?;
        }
    }
    Ok((child, report))
}

/// Parameter-space crossover baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamCrossover {
    /// Every layer (and the log-std block) copied whole from a uniformly
    /// random parent.
    LayerSwap,
    /// All parameters copied from the parent with the higher mean return.
    BestParent,
}

pub fn parameter_crossover(
    px: &GaussianPolicy,
    py: &GaussianPolicy,
    returns: (f64, f64),
    mode: ParamCrossover,
    rng: &mut Prng,
) -> Result<GaussianPolicy> {
    let sizes = px.mean_net.sizes();
    if sizes != py.mean_net.sizes() {
        return Err(GpoError::BadSnapshot(
            "parents have different architectures".into(),
        ));
    }
    match mode {
        ParamCrossover::BestParent => {
            if returns.0 >= returns.1 {
                Ok(px.clone())
            } else {
                Ok(py.clone())
            }
        }
        ParamCrossover::LayerSwap => {
            let mut flat = px.flatten();
            let from_y = py.flatten();
            let mut off = 0;
            for l in 0..sizes.len() - 1 {
                let n = sizes[l + 1] * (sizes[l] + 1);
                if rng.random_bool(0.5) {
                    flat[off..off + n].copy_from_slice(&from_y[off..off + n]);
                }
                off += n;
            }
            if rng.random_bool(0.5) {
                flat[off..].copy_from_slice(&from_y[off..]);
            }
            GaussianPolicy::from_flat(sizes, &flat)
        }
    }
}

/// Outcome of one state-space crossover.
pub struct CrossoverOutcome {
    pub child: GaussianPolicy,
    /// Env transitions consumed (expert plus student rollouts).
    pub transitions: u64,
    pub dagger: DaggerReport,
    /// Parent mean returns from the cached batches, (x, y).
    pub parent_returns: (f64, f64),
}

/// Full state-space crossover: selector dataset from the parents' cached
/// mutation batches, selector training, then imitation of the gated policy.
/// The child starts from the higher-return parent's parameters.
pub fn crossover(
    px: &GaussianPolicy,
    py: &GaussianPolicy,
    cached_x: &Batch,
    cached_y: &Batch,
    env: &mut dyn Env,
    cfg: &GpoConfig,
    rng: &mut Prng,
) -> Result<CrossoverOutcome> {
    let dataset = build_selector_dataset(cached_x, cached_y, cfg.keep_fraction)?;
    let init = SelectorParams::init(&selector_layer_sizes(px.obs_dim()), rng);
    let selector = train_selector(
        &dataset,
        init,
        cfg.selector_epochs,
        cfg.selector_minibatch,
        cfg.selector_lr,
        rng,
    )?;
    let (rx, ry) = (cached_x.mean_return(), cached_y.mean_return());
    let child_init = if rx >= ry { px } else { py };
    let h = HierarchicalPolicy {
        selector: &selector,
        parent_x: px,
        parent_y: py,
    };
    let before = env.steps_taken();
    let (child, dagger) = dagger_distill(&h, env, child_init, cfg, rng)?;
    Ok(CrossoverOutcome {
        child,
        transitions: env.steps_taken() - before,
        dagger,
        parent_returns: (rx, ry),
    })
}
