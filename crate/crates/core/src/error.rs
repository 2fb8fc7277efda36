//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by kernel evaluation, sketching, solving, and recovery.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for the given kernel.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The kernel is locally constant on the relevant window, so the
    /// sketch-dimension calculus degenerates.
    #[error("degenerate kernel: {0}")]
    Degenerate(String),

    /// Every kernel-derivative weight vanished; the iteration cannot move.
    #[error("stalled: all kernel-derivative weights are zero")]
    Stall,

    /// No drawn projection passed verification within the attempt budget.
    #[error("sketch verification failed after {attempts} attempts")]
    SketchFailure { attempts: u32 },

    /// The sketch was built from a different dataset than the one supplied.
    #[error("sketch/dataset fingerprint mismatch")]
    InconsistentSketch,

    /// The covering grid is larger than the configured budget.
    #[error("grid budget exceeded: {points} points > cap {cap}")]
    BudgetExceeded { points: u128, cap: u128 },

    /// The ball-constraint solver did not reach feasibility.
    #[error("extension failed after {sweeps} sweeps (worst constraint ratio {worst_ratio})")]
    ExtensionFailure { sweeps: usize, worst_ratio: f64 },

    /// Malformed input file or specification string.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("csv: {other:?}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
