use std::io;

use thiserror::Error;

/// Errors produced by the design, shaping and simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "output density vanishes where the channel law at amplitude {amplitude} is non-negligible"
    )]
    NumericalSupport { amplitude: f64 },

    #[error("simplex exceeded {iterations} pivots (phase {phase})")]
    SolverIterationCap { phase: u8, iterations: usize },

    #[error("LP is infeasible")]
    Infeasible,

    #[error("cannot place {rings} rings with only {k} points")]
    Allocation { rings: usize, k: usize },

    #[error("codeword lengths do not match the constellation: {0}")]
    Assignment(String),

    #[error("received bit string contains no terminating 1")]
    NoTerminator,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
