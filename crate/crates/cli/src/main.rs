//! Experiment front end: load a key=value config, apply flag overrides,
//! dispatch the requested experiment, and write its CSV outputs.

mod demo;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpo_core::config::{Algo, CrossoverMode, GpoConfig, SelectionMode};
use gpo_core::driver::{ablation_matrix, gpo_run, joint_run, single_run, write_artifacts};
use gpo_core::error::{GpoError, Result};
use gpo_core::report::write_lines;

#[derive(Parser)]
#[command(name = "gpo", about = "Genetic policy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full genetic run: mutate, select, crossover each round.
    Gpo(RunArgs),
    /// Independent policies on the same per-policy budget.
    Single(RunArgs),
    /// One policy with population-times-larger batches.
    Joint(RunArgs),
    /// All operator toggle combinations plus the Single baseline.
    Ablate(RunArgs),
    /// Disjoint-region parents: state-space vs parameter-space crossover.
    CrossoverDemo(RunArgs),
    /// Population-size scaling in fixed-batch and fixed-total variants.
    ScaleSweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    /// Population size.
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Mutation algorithm: ppo or a2c.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Transitions per policy-gradient batch.
    #[arg(long)]
    batch: Option<usize>,
    /// Mutation iterations per round.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Disable data sharing during mutation.
    #[arg(long)]
    no_share: bool,
    /// Crossover operator: state, best-parent, or layer-swap.
    #[arg(long)]
    crossover: Option<String>,
    /// Couple selection: fitness or random.
    #[arg(long)]
    select: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra overrides as key=value (any config key).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn build_config(&self) -> Result<GpoConfig> {
        let mut cfg = match &self.config {
            Some(path) => GpoConfig::from_file(path)?,
            None => GpoConfig::default(),
        };
        if let Some(v) = &self.env {
            cfg.env = v.clone();
        }
        if let Some(v) = self.pop {
            cfg.pop = v;
        }
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = &self.algo {
            cfg.algo = Algo::parse(v)?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.batch {
            cfg.batch = v;
        }
        if let Some(v) = self.iters {
            cfg.mut_iters = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if self.no_share {
            cfg.share = false;
        }
        if let Some(v) = &self.crossover {
            cfg.crossover = CrossoverMode::parse(v)?;
        }
        if let Some(v) = &self.select {
            cfg.select = SelectionMode::parse(v)?;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        for kv in &self.set {
            let (key, value) = kv.split_once('=').ok_or_else(|| {
                GpoError::InvalidConfig(format!("--set expects key=value, got \"{kv}\""))
            })?;
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Gpo(args) => {
            let cfg = args.build_config()?;
            let art = gpo_run(&cfg)?;
            write_artifacts(&cfg.out, &art)?;
            println!(
                "gpo: best final return {} over {} transitions -> {}",
                art.runlog.best_final_return(),
                art.runlog.total_transitions,
                cfg.out.display()
            );
        }
        Cmd::Single(args) => {
            let cfg = args.build_config()?;
            let art = single_run(&cfg)?;
            write_artifacts(&cfg.out, &art)?;
            println!(
                "single: best final return {} over {} transitions -> {}",
                art.runlog.best_final_return(),
                art.runlog.total_transitions,
                cfg.out.display()
            );
        }
        Cmd::Joint(args) => {
            let cfg = args.build_config()?;
            let art = joint_run(&cfg)?;
            write_artifacts(&cfg.out, &art)?;
            println!(
                "joint: best final return {} over {} transitions -> {}",
                art.runlog.best_final_return(),
                art.runlog.total_transitions,
                cfg.out.display()
            );
        }
        Cmd::Ablate(args) => {
            let cfg = args.build_config()?;
            let cells = ablation_matrix(&cfg)?;
            std::fs::create_dir_all(&cfg.out)?;
            std::fs::write(cfg.out.join("config.echo"), cfg.echo())?;
            write_lines(
                &cfg.out.join("ablation.csv"),
                "name,crossover_on,select_on,share_on,best_final_return,normalized",
                cells.iter().map(|c| {
                    format!(
                        "{},{},{},{},{},{}",
                        c.name, c.crossover_on, c.select_on, c.share_on, c.best_final, c.normalized
                    )
                }),
            )?;
            for cell in &cells {
                gpo_core::report::write_runlog_csv(
                    &cfg.out.join(format!("runlog_{}.csv", cell.name)),
                    &cell.runlog.rows,
                )?;
                println!("ablate: {} normalized {}", cell.name, cell.normalized);
            }
        }
        Cmd::CrossoverDemo(args) => {
            let cfg = args.build_config()?;
            demo::crossover_demo(&cfg)?;
        }
        Cmd::ScaleSweep(args) => {
            let cfg = args.build_config()?;
            sweep::scale_sweep(&cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
