//! Crossover comparison on disjoint start regions.
//!
//! Two parents are pretrained on the left and right halves of the
//! navigation task, then combined once by state-space crossover and once by
//! random layer swapping. All four policies are evaluated on the full
//! region; rewards are costs, so the normalized score is
//! `parent_x_return / return` (first parent exactly 1, larger is better).

use gpo_core::config::GpoConfig;
use gpo_core::crossover::{crossover, parameter_crossover, ParamCrossover};
use gpo_core::env::make_env;
use gpo_core::error::{GpoError, Result};
use gpo_core::mutate::mutate_population_with;
use gpo_core::population::{Individual, Population};
use gpo_core::report::write_lines;
use gpo_core::rng::{self, Stream};
use gpo_core::rollout::{collect_episodes, write_batch_csv, Batch};

const COMBINED_ENV: &str = "pointnav";

pub struct DemoOutcome {
    pub parent_x_return: f64,
    pub parent_y_return: f64,
    pub state_child_return: f64,
    pub layerswap_child_return: f64,
    pub crossover_transitions: u64,
    pub total_transitions: u64,
}

/// Pretrain one parent on its region for `pretrain_iters` batches.
fn pretrain_parent(cfg: &GpoConfig, env_name: &str, which: usize) -> Result<Individual> {
    let mut c = cfg.clone();
    c.env = env_name.to_string();
    c.pop = 1;
    c.share = false;
    let env = make_env(&c.env, c.horizon)?;
    let (obs, act) = (env.spec().obs_dim, env.spec().act_dim);
    let mut pop = Population {
        members: vec![Individual::fresh(obs, act, &c, 0, which)],
    };
    let allowance = (c.pretrain_iters * c.batch) as u64;
    mutate_population_with(&mut pop, &c, which, allowance)?;
    Ok(pop.members.into_iter().next().unwrap())
}

fn evaluate(policy: &gpo_core::nn::GaussianPolicy, cfg: &GpoConfig, slot: usize) -> Result<Batch> {
    let mut env = make_env(COMBINED_ENV, cfg.horizon)?;
    let mut rng = rng::derive(cfg.seed, 0, slot, Stream::Eval);
    collect_episodes(policy, env.as_mut(), cfg.eval_episodes, slot, &mut rng)
}

pub fn run_demo(cfg: &GpoConfig) -> Result<DemoOutcome> {
    let parent_x = pretrain_parent(cfg, "pointnav:left", 0)?;
    let parent_y = pretrain_parent(cfg, "pointnav:right", 1)?;
    let cached_x = parent_x.cached.as_deref().expect("pretraining caches a batch");
    let cached_y = parent_y.cached.as_deref().expect("pretraining caches a batch");
    let pretrain_steps = 2 * (cfg.pretrain_iters * cfg.batch) as u64;

    let mut env = make_env(COMBINED_ENV, cfg.horizon)?;
    let mut rng = rng::derive(cfg.seed, 0, 0, Stream::Crossover);
    let state_out = crossover(
        &parent_x.policy,
        &parent_y.policy,
        cached_x,
        cached_y,
        env.as_mut(),
        cfg,
        &mut rng,
    )?;
    let mut swap_rng = rng::derive(cfg.seed, 0, 1, Stream::Crossover);
    let swap_child = parameter_crossover(
        &parent_x.policy,
        &parent_y.policy,
        state_out.parent_returns,
        ParamCrossover::LayerSwap,
        &mut swap_rng,
    )?;

    let eval_x = evaluate(&parent_x.policy, cfg, 0)?;
    let eval_y = evaluate(&parent_y.policy, cfg, 1)?;
    let eval_state = evaluate(&state_out.child, cfg, 2)?;
    let eval_swap = evaluate(&swap_child, cfg, 3)?;
    let eval_steps: u64 = [&eval_x, &eval_y, &eval_state, &eval_swap]
        .iter()
        .map(|b| b.transition_count() as u64)
        .sum();

    let outcome = DemoOutcome {
        parent_x_return: eval_x.mean_return(),
        parent_y_return: eval_y.mean_return(),
        state_child_return: eval_state.mean_return(),
        layerswap_child_return: eval_swap.mean_return(),
        crossover_transitions: state_out.transitions,
        total_transitions: pretrain_steps + state_out.transitions + eval_steps,
    };

    // Spend no more than the documented budget: pretraining plus one
    // imitation crossover plus four bounded evaluations.
    let budget = pretrain_steps
        + cfg.crossover_budget()
        + 4 * (cfg.eval_episodes * cfg.horizon) as u64;
    if outcome.total_transitions > budget {
        return Err(GpoError::InvalidConfig(format!(
            "demo consumed {} transitions, budget is {budget}",
            outcome.total_transitions
        )));
    }

    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("config.echo"), cfg.echo())?;
    let norm = |r: f64| outcome.parent_x_return / r;
    write_lines(
        &cfg.out.join("demo.csv"),
        "policy,mean_return,normalized_return",
        [
            format!("parent_x,{},{}", outcome.parent_x_return, norm(outcome.parent_x_return)),
            format!("parent_y,{},{}", outcome.parent_y_return, norm(outcome.parent_y_return)),
            format!(
                "child_state,{},{}",
                outcome.state_child_return,
                norm(outcome.state_child_return)
            ),
            format!(
                "child_layerswap,{},{}",
                outcome.layerswap_child_return,
                norm(outcome.layerswap_child_return)
            ),
        ],
    )?;
    write_lines(
        &cfg.out.join("crossover.csv"),
        "round,parent_x_id,parent_y_id,parent_x_return,parent_y_return,child_return,transitions_used",
        [
            format!(
                "0,0,1,{},{},{},{}",
                outcome.parent_x_return,
                outcome.parent_y_return,
                outcome.state_child_return,
                state_out.transitions
            ),
            format!(
                "0,0,1,{},{},{},0",
                outcome.parent_x_return, outcome.parent_y_return, outcome.layerswap_child_return
            ),
        ],
    )?;
    write_batch_csv(&cfg.out.join("states_parent_x.csv"), &eval_x)?;
    write_batch_csv(&cfg.out.join("states_parent_y.csv"), &eval_y)?;
    write_batch_csv(&cfg.out.join("states_child_state.csv"), &eval_state)?;
    write_batch_csv(&cfg.out.join("states_child_layerswap.csv"), &eval_swap)?;
    Ok(outcome)
}

pub fn crossover_demo(cfg: &GpoConfig) -> Result<()> {
    let out = run_demo(cfg)?;
    println!(
        "crossover-demo: parent_x {} parent_y {} state-child {} layerswap-child {} ({} crossover transitions)",
        out.parent_x_return,
        out.parent_y_return,
        out.state_child_return,
        out.layerswap_child_return,
        out.crossover_transitions
    );
    Ok(())
}
