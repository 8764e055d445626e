use std::fmt;

use crate::optim::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a chain failed the ergodicity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErgodicityFailure {
    /// The reachable states split into `classes` communicating classes.
    Reducible { classes: usize },
    /// The recurrent class is periodic with the given period.
    Periodic { period: usize },
}

impl fmt::Display for ErgodicityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErgodicityFailure::Reducible { classes } => {
                write!(f, "reducible ({classes} communicating classes)")
            }
            ErgodicityFailure::Periodic { period } => write!(f, "periodic (period {period})"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible ban set: {available} coordinates allowed, {needed} required")]
    InfeasibleBanSet { available: usize, needed: usize },

    #[error("infeasible sample: {positive} coordinates with positive probability, {needed} required")]
    InfeasibleSample { positive: usize, needed: usize },

    #[error("state space of {size} states exceeds the cap of {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error("chain is not ergodic: {0}")]
    NonErgodic(ErgodicityFailure),

    #[error("chain did not mix within {0} steps")]
    NotMixed(usize),

    #[error("outside the formula's regime: {0}")]
    OutOfRegime(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("parameter regime violated: {0}")]
    ParameterRegime(String),

    #[error("iterates diverged at iteration {t}")]
    Diverged {
        t: u64,
        partial: Option<Box<TrainTrace>>,
    },

    #[error("not converged after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 divergence, 4 numerical, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Diverged { .. } => 3,
            Error::Numerical(_) | Error::NotConverged { .. } | Error::NotMixed(_) => 4,
            _ => 1,
        }
    }
}
