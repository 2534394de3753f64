//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpoError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty batch list for {0}")]
    EmptyBatchList(&'static str),

    #[error("empty trajectory pool after filtering (keep_fraction too small?)")]
    EmptyPool,

    #[error("empty probe state set")]
    EmptyProbe,

    #[error("missing probe batch for policy {0}")]
    MissingProbe(usize),

    #[error("non-finite value detected in {0}")]
    NonFinite(&'static str),

    #[error("couple count {count} exceeds number of distinct couples {max}")]
    CoupleCountTooLarge { count: usize, max: usize },

    #[error("unknown environment \"{0}\" (valid: pointnav, pointnav:left, pointnav:right, pendulum)")]
    UnknownEnv(String),

    #[error("unknown algorithm \"{0}\" (valid: ppo, a2c)")]
    UnknownAlgo(String),

    #[error("unknown crossover mode \"{0}\" (valid: state, best-parent, layer-swap)")]
    UnknownCrossover(String),

    #[error("unknown selection mode \"{0}\" (valid: fitness, random)")]
    UnknownSelection(String),

    #[error("unknown config key \"{0}\"")]
    UnknownKey(String),

    #[error("malformed value \"{value}\" for config key \"{key}\"")]
    BadValue { key: String, value: String },

    #[error("missing environment name (set env= in config or pass --env)")]
    MissingEnv,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parameter snapshot does not match architecture: {0}")]
    BadSnapshot(String),

    #[error("round {round}, policy {policy}: {source}")]
    Context {
        round: usize,
        policy: usize,
        #[source]
        source: Box<GpoError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GpoError {
    /// Attach the round/policy coordinates where an operator failed.
    pub fn at(self, round: usize, policy: usize) -> GpoError {
        GpoError::Context {
            round,
            policy,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, GpoError>;
