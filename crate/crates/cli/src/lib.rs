//! Experiment runner behind the `banach-sgd` binary.

pub mod config;
pub mod experiment;
pub mod output;

use std::fmt;

/// Failure classes that map onto process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad config, arguments or input data (exit 1).
    Validation(String),
    /// A run produced non-finite values or broke a recorded invariant (exit 2).
    Invariant(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid configuration: {m}"),
            Failure::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Exit code for an error chain; the outermost classifiable cause wins.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Validation(_) => EXIT_VALIDATION,
                Failure::Invariant(_) => EXIT_INVARIANT,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<serde_json::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if let Some(e) = cause.downcast_ref::<banach_sgd::Error>() {
            return match e {
                banach_sgd::Error::Config(_) => EXIT_VALIDATION,
                _ => EXIT_INVARIANT,
            };
        }
    }
    EXIT_INVARIANT
}
