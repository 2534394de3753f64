//! Run configuration: every hyperparameter of the genetic optimizer and its
//! operators, loadable from a plain key=value file with CLI overrides.
//! Unknown keys are hard errors so typos surface immediately.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{GpoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Ppo,
    A2c,
}

impl Algo {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Algo::Ppo),
            "a2c" => Ok(Algo::A2c),
            other => Err(GpoError::UnknownAlgo(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Ppo => "ppo",
            Algo::A2c => "a2c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverMode {
    /// Selector + hierarchical policy + imitation (the state-space operator).
    State,
    /// Copy all parameters from the stronger parent.
    BestParent,
    /// Copy each layer whole from a uniformly random parent.
    LayerSwap,
}

impl CrossoverMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(CrossoverMode::State),
            "best-parent" => Ok(CrossoverMode::BestParent),
            "layer-swap" => Ok(CrossoverMode::LayerSwap),
            other => Err(GpoError::UnknownCrossover(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CrossoverMode::State => "state",
            CrossoverMode::BestParent => "best-parent",
            CrossoverMode::LayerSwap => "layer-swap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Fitness,
    Random,
}

impl SelectionMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fitness" => Ok(SelectionMode::Fitness),
            "random" => Ok(SelectionMode::Random),
            other => Err(GpoError::UnknownSelection(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SelectionMode::Fitness => "fitness",
            SelectionMode::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpoConfig {
    pub env: String,
    /// Population size m.
    pub pop: usize,
    /// Genetic rounds k.
    pub rounds: usize,
    pub algo: Algo,
    /// Policy-gradient iterations per mutation round.
    pub mut_iters: usize,
    /// Transitions per policy-gradient batch.
    pub batch: usize,
    pub horizon: usize,
    pub gamma: f64,
    /// Policy learning rate.
    pub lr: f64,
    pub ppo_epochs: usize,
    /// Target KL per update for the adaptive penalty.
    pub d_targ: f64,
    pub beta_init: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// KL threshold for similarity sets.
    pub epsilon: f64,
    /// Data sharing across similar policies during mutation.
    pub share: bool,
    pub normalize_adv: bool,
    /// Bootstrap horizon-cut episodes with the critic value (default off:
    /// cut episodes are treated as terminal).
    pub bootstrap: bool,
    pub critic_lr: f64,
    pub critic_epochs: usize,
    pub critic_minibatch: usize,
    /// Epochs for the first fit of a freshly initialized critic (children
    /// inherit fresh critics, fitted from their first mutation batch).
    pub critic_warmup_epochs: usize,
    /// Fraction of pooled parent trajectories kept for selector training.
    pub keep_fraction: f64,
    pub selector_epochs: usize,
    pub selector_minibatch: usize,
    pub selector_lr: f64,
    /// Expert transitions collected before imitation.
    pub dagger_expert: usize,
    /// Student transitions added per imitation iteration.
    pub dagger_student: usize,
    pub dagger_iters: usize,
    pub dagger_epochs: usize,
    pub dagger_minibatch: usize,
    pub dagger_lr: f64,
    /// Fitness weights (performance, diversity).
    pub alpha_perf: f64,
    pub alpha_div: f64,
    /// If > 0, alpha_div is annealed linearly to zero over this many rounds.
    pub div_anneal_rounds: usize,
    pub crossover: CrossoverMode,
    pub select: SelectionMode,
    /// Couples selected per round; 0 means "population size".
    pub couples: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Episodes per policy when a run evaluates explicitly (crossover demo).
    pub eval_episodes: usize,
    /// Mutation iterations used to pretrain demo parents.
    pub pretrain_iters: usize,
}

impl Default for GpoConfig {
    fn default() -> Self {
        GpoConfig {
            env: "pointnav".into(),
            pop: 4,
            rounds: 4,
            algo: Algo::Ppo,
            mut_iters: 10,
            batch: 2048,
            horizon: 512,
            gamma: 0.99,
            lr: 3e-4,
            ppo_epochs: 10,
            d_targ: 0.01,
            beta_init: 1.0,
            beta_min: 1e-4,
            beta_max: 1e4,
            epsilon: 0.05,
            share: true,
            normalize_adv: true,
            bootstrap: false,
            critic_lr: 5e-4,
            critic_epochs: 10,
            critic_minibatch: 64,
            critic_warmup_epochs: 100,
            keep_fraction: 0.6,
            selector_epochs: 100,
            selector_minibatch: 64,
            selector_lr: 5e-4,
            dagger_expert: 5000,
            dagger_student: 500,
            dagger_iters: 10,
            dagger_epochs: 10,
            dagger_minibatch: 64,
            dagger_lr: 5e-4,
            alpha_perf: 1.0,
            alpha_div: 0.0,
            div_anneal_rounds: 0,
            crossover: CrossoverMode::State,
            select: SelectionMode::Fitness,
            couples: 0,
            seed: 0,
            out: PathBuf::from("out"),
            eval_episodes: 20,
            pretrain_iters: 40,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| GpoError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(GpoError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        }),
    }
}

impl GpoConfig {
    /// Apply one key=value assignment (config file line or CLI override).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "env" => self.env = value.to_string(),
            "pop" => self.pop = parse_num(key, value)?,
            "rounds" => self.rounds = parse_num(key, value)?,
            "algo" => self.algo = Algo::parse(value)?,
            "mut_iters" => self.mut_iters = parse_num(key, value)?,
            "batch" => self.batch = parse_num(key, value)?,
            "horizon" => self.horizon = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "ppo_epochs" => self.ppo_epochs = parse_num(key, value)?,
            "d_targ" => self.d_targ = parse_num(key, value)?,
            "beta_init" => self.beta_init = parse_num(key, value)?,
            "beta_min" => self.beta_min = parse_num(key, value)?,
            "beta_max" => self.beta_max = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "share" => self.share = parse_bool(key, value)?,
            "normalize_adv" => self.normalize_adv = parse_bool(key, value)?,
            "bootstrap" => self.bootstrap = parse_bool(key, value)?,
            "critic_lr" => self.critic_lr = parse_num(key, value)?,
            "critic_epochs" => self.critic_epochs = parse_num(key, value)?,
            "critic_minibatch" => self.critic_minibatch = parse_num(key, value)?,
            "critic_warmup_epochs" => self.critic_warmup_epochs = parse_num(key, value)?,
            "keep_fraction" => self.keep_fraction = parse_num(key, value)?,
            "selector_epochs" => self.selector_epochs = parse_num(key, value)?,
            "selector_minibatch" => self.selector_minibatch = parse_num(key, value)?,
            "selector_lr" => self.selector_lr = parse_num(key, value)?,
            "dagger_expert" => self.dagger_expert = parse_num(key, value)?,
            "dagger_student" => self.dagger_student = parse_num(key, value)?,
            "dagger_iters" => self.dagger_iters = parse_num(key, value)?,
            "dagger_epochs" => self.dagger_epochs = parse_num(key, value)?,
            "dagger_minibatch" => self.dagger_minibatch = parse_num(key, value)?,
            "dagger_lr" => self.dagger_lr = parse_num(key, value)?,
            "alpha_perf" => self.alpha_perf = parse_num(key, value)?,
            "alpha_div" => self.alpha_div = parse_num(key, value)?,
            "div_anneal_rounds" => self.div_anneal_rounds = parse_num(key, value)?,
            "crossover" => self.crossover = CrossoverMode::parse(value)?,
            "select" => self.select = SelectionMode::parse(value)?,
            "couples" => self.couples = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "eval_episodes" => self.eval_episodes = parse_num(key, value)?,
            "pretrain_iters" => self.pretrain_iters = parse_num(key, value)?,
            other => return Err(GpoError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Load a key=value file ('#' starts a comment, blank lines ignored).
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = GpoConfig::default();
        let text = std::fs::read_to_string(path)?;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| GpoError::InvalidConfig(format!("expected key=value, got \"{line}\"")))?;
            cfg.apply(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.env.is_empty() {
            return Err(GpoError::MissingEnv);
        }
        if self.pop < 1 {
            return Err(GpoError::InvalidConfig("pop must be >= 1".into()));
        }
        if self.rounds < 1 {
            return Err(GpoError::InvalidConfig("rounds must be >= 1".into()));
        }
        if self.mut_iters < 1 || self.batch < 1 || self.horizon < 1 {
            return Err(GpoError::InvalidConfig(
                "mut_iters, batch and horizon must be positive".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(GpoError::InvalidConfig("gamma must be in (0, 1]".into()));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(GpoError::InvalidConfig(
                "keep_fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Number of couples (and therefore children) per round.
    pub fn couples_per_round(&self) -> usize {
        if self.couples == 0 {
            self.pop
        } else {
            self.couples
        }
    }

    /// Env transitions one crossover consumes (expert plus student rollouts).
    pub fn crossover_budget(&self) -> u64 {
        (self.dagger_expert + self.dagger_student * self.dagger_iters) as u64
    }

    /// Per-policy transition allowance for one mutation round.
    pub fn mutation_allowance(&self) -> u64 {
        (self.mut_iters * self.batch) as u64
    }

    /// Total per-policy budget over the whole run: mutation plus this
    /// policy's share of crossover data, times rounds. The equal-budget
    /// baselines spend the same total on mutation alone.
    pub fn per_policy_budget(&self) -> u64 {
        self.rounds as u64 * (self.mutation_allowance() + self.crossover_budget())
    }

    /// Effective diversity weight at a given round (optional linear anneal).
    pub fn alpha_div_at(&self, round: usize) -> f64 {
        if self.div_anneal_rounds == 0 {
            self.alpha_div
        } else {
            let frac = 1.0 - (round as f64 / self.div_anneal_rounds as f64).min(1.0);
            self.alpha_div * frac
        }
    }

    /// Deterministic key=value dump (used for config.echo provenance).
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "env = {}", self.env);
        let _ = writeln!(s, "pop = {}", self.pop);
        let _ = writeln!(s, "rounds = {}", self.rounds);
        let _ = writeln!(s, "algo = {}", self.algo.name());
        let _ = writeln!(s, "mut_iters = {}", self.mut_iters);
        let _ = writeln!(s, "batch = {}", self.batch);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "ppo_epochs = {}", self.ppo_epochs);
        let _ = writeln!(s, "d_targ = {}", self.d_targ);
        let _ = writeln!(s, "beta_init = {}", self.beta_init);
        let _ = writeln!(s, "beta_min = {}", self.beta_min);
        let _ = writeln!(s, "beta_max = {}", self.beta_max);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "share = {}", if self.share { "on" } else { "off" });
        let _ = writeln!(s, "normalize_adv = {}", if self.normalize_adv { "on" } else { "off" });
        let _ = writeln!(s, "bootstrap = {}", if self.bootstrap { "on" } else { "off" });
        let _ = writeln!(s, "critic_lr = {}", self.critic_lr);
        let _ = writeln!(s, "critic_epochs = {}", self.critic_epochs);
        let _ = writeln!(s, "critic_minibatch = {}", self.critic_minibatch);
        let _ = writeln!(s, "critic_warmup_epochs = {}", self.critic_warmup_epochs);
        let _ = writeln!(s, "keep_fraction = {}", self.keep_fraction);
        let _ = writeln!(s, "selector_epochs = {}", self.selector_epochs);
        let _ = writeln!(s, "selector_minibatch = {}", self.selector_minibatch);
        let _ = writeln!(s, "selector_lr = {}", self.selector_lr);
        let _ = writeln!(s, "dagger_expert = {}", self.dagger_expert);
        let _ = writeln!(s, "dagger_student = {}", self.dagger_student);
        let _ = writeln!(s, "dagger_iters = {}", self.dagger_iters);
        let _ = writeln!(s, "dagger_epochs = {}", self.dagger_epochs);
        let _ = writeln!(s, "dagger_minibatch = {}", self.dagger_minibatch);
        let _ = writeln!(s, "dagger_lr = {}", self.dagger_lr);
        let _ = writeln!(s, "alpha_perf = {}", self.alpha_perf);
        let _ = writeln!(s, "alpha_div = {}", self.alpha_div);
        let _ = writeln!(s, "div_anneal_rounds = {}", self.div_anneal_rounds);
        let _ = writeln!(s, "crossover = {}", self.crossover.name());
        let _ = writeln!(s, "select = {}", self.select.name());
        let _ = writeln!(s, "couples = {}", self.couples);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "eval_episodes = {}", self.eval_episodes);
        let _ = writeln!(s, "pretrain_iters = {}", self.pretrain_iters);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_a_named_error() {
        let mut cfg = GpoConfig::default();
        let err = cfg.apply("populaton", "4").unwrap_err();
        assert!(err.to_string().contains("populaton"));
    }

    #[test]
    fn bad_algo_lists_valid_set() {
        let mut cfg = GpoConfig::default();
        let err = cfg.apply("algo", "ppq").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ppq") && msg.contains("ppo") && msg.contains("a2c"));
    }

    #[test]
    fn file_roundtrip_through_echo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        let mut cfg = GpoConfig::default();
        cfg.apply("pop", "8").unwrap();
        cfg.apply("env", "pendulum").unwrap();
        cfg.apply("share", "off").unwrap();
        std::fs::write(&path, cfg.echo()).unwrap();
        let loaded = GpoConfig::from_file(&path).unwrap();
        assert_eq!(loaded, cfg);
    }

    #[test]
    fn malformed_value_names_key_and_value() {
        let mut cfg = GpoConfig::default();
        let err = cfg.apply("pop", "many").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pop") && msg.contains("many"));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# a comment\n\npop = 6 # trailing\n").unwrap();
        let cfg = GpoConfig::from_file(&path).unwrap();
        assert_eq!(cfg.pop, 6);
    }

    #[test]
    fn budget_arithmetic() {
        let cfg = GpoConfig::default();
        assert_eq!(cfg.crossover_budget(), 10_000);
        assert_eq!(cfg.mutation_allowance(), 20_480);
        assert_eq!(cfg.per_policy_budget(), 4 * 30_480);
    }
}
