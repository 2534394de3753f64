//! The genetic optimization loop and its equal-budget baselines.
//!
//! One round is mutate -> select -> crossover -> replace. The `Single`
//! baseline trains the same number of policies on the same per-policy
//! transition budget with mutation only; `Joint` trains one policy whose
//! batches are population-size times larger, doing the same number of
//! gradient steps as each `Single` policy. All data collection is driven by
//! transition allowances, so the three modes consume identical totals
//! whenever batch sizes align with whole episodes.

use std::path::Path;

use rayon::prelude::*;

use crate::config::{CrossoverMode, GpoConfig, SelectionMode};
use crate::crossover::{crossover, parameter_crossover, ParamCrossover};
use crate::env::make_env;
use crate::error::{GpoError, Result};
use crate::mutate::{mutate_population_with, MutationRow};
use crate::population::{Individual, Population};
use crate::report;
use crate::rng::{self, Stream};
use crate::select::{random_couples, select_couples, Couple};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub round: usize,
    pub policy_id: usize,
    pub mean_return: f64,
    pub std_error: f64,
    /// Env transitions consumed by the whole run up to this row, counting
    /// every simulation step including imitation rollouts.
    pub cum_transitions: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub rows: Vec<RunRow>,
    pub total_transitions: u64,
}

impl RunLog {
    /// Best mean return among the final round's rows.
    pub fn best_final_return(&self) -> f64 {
        let last = self.rows.iter().map(|r| r.round).max().unwrap_or(0);
        self.rows
            .iter()
            .filter(|r| r.round == last)
            .map(|r| r.mean_return)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub round: usize,
    pub rank: usize,
    pub i: usize,
    pub j: usize,
    pub f_perf: f64,
    pub f_div: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverRow {
    pub round: usize,
    pub parent_x_id: usize,
    pub parent_y_id: usize,
    pub parent_x_return: f64,
    pub parent_y_return: f64,
    /// NaN inside genetic runs (children are never evaluated separately to
    /// keep budgets exact); the crossover demo fills it from real rollouts.
    pub child_return: f64,
    pub transitions_used: u64,
}

/// Everything a run produces; persistence is a separate step.
#[derive(Debug, Clone)]
pub struct GpoArtifacts {
    pub runlog: RunLog,
    pub mutation_log: Vec<MutationRow>,
    pub selection_log: Vec<SelectionRow>,
    pub crossover_log: Vec<CrossoverRow>,
    pub population: Population,
    pub config: GpoConfig,
}

fn env_dims(cfg: &GpoConfig) -> Result<(usize, usize)> {
    let env = make_env(&cfg.env, cfg.horizon)?;
    Ok((env.spec().obs_dim, env.spec().act_dim))
}

fn push_run_rows(runlog: &mut RunLog, rows: &[MutationRow]) {
    runlog.total_transitions += rows.iter().map(|r| r.transitions).sum::<u64>();
    for r in rows {
        runlog.rows.push(RunRow {
            round: r.round,
            policy_id: r.policy_id,
            mean_return: r.mean_return,
            std_error: r.std_error,
            cum_transitions: runlog.total_transitions,
        });
    }
}

/// Select the couples for one round, already clamped so that repeating them
/// cyclically yields one child per population slot.
fn pick_couples(pop: &Population, cfg: &GpoConfig, round: usize) -> Result<Vec<Couple>> {
    let m = pop.size();
    let max = m * (m - 1) / 2;
    let count = cfg.couples_per_round().min(max);
    match cfg.select {
        SelectionMode::Fitness => {
            let perf = pop.mean_returns();
            // Probe states for pairwise diversity: both parents' cached
            // batches, concatenated.
            let states: Vec<Vec<Vec<f64>>> = pop
                .members
                .iter()
                .map(|x| {
                    x.cached
                        .as_ref()
                        .map(|b| b.steps().map(|s| s.obs.clone()).collect())
                        .unwrap_or_default()
                })
                .collect();
            let div = |i: usize, j: usize| -> f64 {
                let probe: Vec<Vec<f64>> = states[i]
                    .iter()
                    .chain(states[j].iter())
                    .cloned()
                    .collect();
                if probe.is_empty() {
                    return 0.0;
                }
                crate::select::diversity_fitness(
                    &pop.members[i].policy,
                    &pop.members[j].policy,
                    &probe,
                )
                .unwrap_or(0.0)
            };
            select_couples(&perf, &div, (cfg.alpha_perf, cfg.alpha_div_at(round)), count)
        }
        SelectionMode::Random => {
            let mut rng = rng::derive(cfg.seed, round, 0, Stream::Select);
            random_couples(m, count, &mut rng)
        }
    }
}

struct ChildOutcome {
    child: Individual,
    row: CrossoverRow,
    transitions: u64,
}

fn breed_children(
    pop: &Population,
    couples: &[Couple],
    cfg: &GpoConfig,
    round: usize,
) -> Result<Vec<ChildOutcome>> {
    let (obs_dim, _) = env_dims(cfg)?;
    (0..pop.size())
        .into_par_iter()
        .map(|slot| {
            let couple = &couples[slot % couples.len()];
            let (i, j) = (couple.i, couple.j);
            let px = &pop.members[i];
            let py = &pop.members[j];
            let (rx, ry) = (px.mean_return(), py.mean_return());
            let mut rng = rng::derive(cfg.seed, round, slot, Stream::Crossover);
            let (policy, transitions) = match cfg.crossover {
                CrossoverMode::State => {
                    let cached_x = px.cached.as_deref().ok_or(GpoError::MissingProbe(i))?;
                    let cached_y = py.cached.as_deref().ok_or(GpoError::MissingProbe(j))?;
                    let mut env = make_env(&cfg.env, cfg.horizon)?;
                    let out = crossover(
                        &px.policy, &py.policy, cached_x, cached_y, env.as_mut(), cfg, &mut rng,
                    )?;
                    (out.child, out.transitions)
                }
                CrossoverMode::BestParent => (
                    parameter_crossover(
                        &px.policy,
                        &py.policy,
                        (rx, ry),
                        ParamCrossover::BestParent,
                        &mut rng,
                    )?,
                    0,
                ),
                CrossoverMode::LayerSwap => (
                    parameter_crossover(
                        &px.policy,
                        &py.policy,
                        (rx, ry),
                        ParamCrossover::LayerSwap,
                        &mut rng,
                    )?,
                    0,
                ),
            };
            let stronger = if rx >= ry { px } else { py };
            let child = Individual::child(policy, stronger, obs_dim, cfg, round + 1, slot);
            Ok(ChildOutcome {
                child,
                row: CrossoverRow {
                    round,
                    parent_x_id: i,
                    parent_y_id: j,
                    parent_x_return: rx,
                    parent_y_return: ry,
                    child_return: f64::NAN,
                    transitions_used: transitions,
                },
                transitions,
            })
        })
        .map(|r: Result<ChildOutcome>| r.map_err(|e| e.at(round, usize::MAX)))
        .collect()
}

/// The full genetic optimization loop.
pub fn gpo_run(cfg: &GpoConfig) -> Result<GpoArtifacts> {
    cfg.validate()?;
    if cfg.pop < 2 {
        return Err(GpoError::InvalidConfig(
            "genetic optimization needs pop >= 2".into(),
        ));
    }
    let (obs_dim, act_dim) = env_dims(cfg)?;
    let mut pop = Population::init(obs_dim, act_dim, cfg);
    let mut runlog = RunLog::default();
    let mut mutation_log = Vec::new();
    let mut selection_log = Vec::new();
    let mut crossover_log = Vec::new();

    for round in 0..cfg.rounds {
        assert_eq!(pop.size(), cfg.pop, "population size must stay constant");
        let rows = mutate_population_with(&mut pop, cfg, round, cfg.mutation_allowance())?;
        push_run_rows(&mut runlog, &rows);
        mutation_log.extend(rows);

        let couples = pick_couples(&pop, cfg, round)?;
        for (rank, c) in couples.iter().enumerate() {
            selection_log.push(SelectionRow {
                round,
                rank,
                i: c.i,
                j: c.j,
                f_perf: c.f_perf,
                f_div: c.f_div,
                score: c.score,
            });
        }

        let outcomes = breed_children(&pop, &couples, cfg, round)?;
        let mut children = Vec::with_capacity(pop.size());
        for out in outcomes {
            runlog.total_transitions += out.transitions;
            crossover_log.push(out.row);
            children.push(out.child);
        }
        pop.members = children;
    }

    Ok(GpoArtifacts {
        runlog,
        mutation_log,
        selection_log,
        crossover_log,
        population: pop,
        config: cfg.clone(),
    })
}

/// Independent mutation-only policies on the same per-policy budget as the
/// genetic run (the crossover share is spent on extra mutation data).
pub fn single_run(cfg: &GpoConfig) -> Result<GpoArtifacts> {
    cfg.validate()?;
    let mut cfg_single = cfg.clone();
    cfg_single.share = false;
    let (obs_dim, act_dim) = env_dims(&cfg_single)?;
    let mut pop = Population::init(obs_dim, act_dim, &cfg_single);
    let mut runlog = RunLog::default();
    let mut mutation_log = Vec::new();
    let allowance = cfg.mutation_allowance() + cfg.crossover_budget();
    for round in 0..cfg.rounds {
        let rows = mutate_population_with(&mut pop, &cfg_single, round, allowance)?;
        push_run_rows(&mut runlog, &rows);
        mutation_log.extend(rows);
    }
    Ok(GpoArtifacts {
        runlog,
        mutation_log,
        selection_log: Vec::new(),
        crossover_log: Vec::new(),
        population: pop,
        config: cfg_single,
    })
}

/// One policy with population-size-times-larger batches: same total
/// transitions as the genetic run, same gradient-step count as each
/// `Single` policy.
pub fn joint_run(cfg: &GpoConfig) -> Result<GpoArtifacts> {
    cfg.validate()?;
    let mut cfg_joint = cfg.clone();
    cfg_joint.pop = 1;
    cfg_joint.batch = cfg.batch * cfg.pop;
    cfg_joint.share = false;
    let (obs_dim, act_dim) = env_dims(&cfg_joint)?;
    let mut pop = Population::init(obs_dim, act_dim, &cfg_joint);
    let mut runlog = RunLog::default();
    let mut mutation_log = Vec::new();
    let allowance = cfg.pop as u64 * (cfg.mutation_allowance() + cfg.crossover_budget());
    for round in 0..cfg.rounds {
        let rows = mutate_population_with(&mut pop, &cfg_joint, round, allowance)?;
        push_run_rows(&mut runlog, &rows);
        mutation_log.extend(rows);
    }
    Ok(GpoArtifacts {
        runlog,
        mutation_log,
        selection_log: Vec::new(),
        crossover_log: Vec::new(),
        population: pop,
        config: cfg_joint,
    })
}

/// One cell of the operator ablation grid.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub name: String,
    pub crossover_on: bool,
    pub select_on: bool,
    pub share_on: bool,
    pub best_final: f64,
    /// Best final return divided by the full configuration's best final.
    pub normalized: f64,
    pub runlog: RunLog,
}

fn ablation_name(c: bool, s: bool, m: bool) -> String {
    match (c, s, m) {
        (true, true, true) => "GPO".into(),
        (false, false, false) => "Base".into(),
        _ => {
            let mut name = String::from("Base");
            if m {
                name.push_str("+M");
            }
            if c {
                name.push_str("+C");
            }
            if s {
                name.push_str("+S");
            }
            name
        }
    }
}

/// Run all eight {crossover, selection, sharing} toggle combinations plus
/// the `Single` baseline under one seed. Scores are normalized to the full
/// configuration.
pub fn ablation_matrix(cfg: &GpoConfig) -> Result<Vec<AblationCell>> {
    let combos: [(bool, bool, bool); 8] = [
        (false, false, false),
        (true, false, false),
        (false, true, false),
        (false, false, true),
        (true, true, false),
        (true, false, true),
        (false, true, true),
        (true, true, true),
    ];
    let mut cells = Vec::new();
    let single = single_run(cfg)?;
    cells.push(AblationCell {
        name: "Single".into(),
        crossover_on: false,
        select_on: false,
        share_on: false,
        best_final: single.runlog.best_final_return(),
        normalized: f64::NAN,
        runlog: single.runlog,
    });
    for (c, s, m) in combos {
        let mut cell_cfg = cfg.clone();
        cell_cfg.crossover = if c {
            CrossoverMode::State
        } else {
            CrossoverMode::BestParent
        };
        cell_cfg.select = if s {
            SelectionMode::Fitness
        } else {
            SelectionMode::Random
        };
        cell_cfg.share = m;
        let art = gpo_run(&cell_cfg)?;
        cells.push(AblationCell {
            name: ablation_name(c, s, m),
            crossover_on: c,
            select_on: s,
            share_on: m,
            best_final: art.runlog.best_final_return(),
            normalized: f64::NAN,
            runlog: art.runlog,
        });
    }
    let gpo_score = cells
        .iter()
        .find(|x| x.name == "GPO")
        .map(|x| x.best_final)
        .unwrap();
    for cell in cells.iter_mut() {
        cell.normalized = cell.best_final / gpo_score;
    }
    Ok(cells)
}

/// Persist a run: config echo, run log, operator logs, final state
/// visitation dumps and policy snapshots.
pub fn write_artifacts(dir: &Path, art: &GpoArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.echo"), art.config.echo())?;
    report::write_runlog_csv(&dir.join("runlog.csv"), &art.runlog.rows)?;
    report::write_mutation_csv(&dir.join("mutation.csv"), &art.mutation_log)?;
    if !art.selection_log.is_empty() {
        report::write_selection_csv(&dir.join("selection.csv"), &art.selection_log)?;
    }
    if !art.crossover_log.is_empty() {
        report::write_crossover_csv(&dir.join("crossover.csv"), &art.crossover_log)?;
    }
    for (i, member) in art.population.members.iter().enumerate() {
        member.policy.save(&dir.join(format!("policy_{i}.bin")))?;
        if let Some(batch) = &member.cached {
            crate::rollout::write_batch_csv(&dir.join(format!("states_p{i}.csv")), batch)?;
        }
    }
    Ok(())
}
