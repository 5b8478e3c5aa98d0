//! Experiment harness behind the `regretlab` command.

pub mod analyze;
pub mod config;
pub mod experiment;
pub mod info;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ErrorRecord, RunOptions};

/// Exit status for a passed check or successful command.
pub const EXIT_OK: i32 = 0;
/// Exit status for a failed check or a failure while running.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for bad arguments, configs or references.
pub const EXIT_USAGE: i32 = 2;

/// Environment variable replacing the config's master seed.
pub const SEED_ENV: &str = "REGRETLAB_SEED";

/// Whether an error stems from the user's input rather than the run.
pub fn is_usage_error(e: &regretlab::Error) -> bool {
    use regretlab::Error::*;
    matches!(e, Parse(_) | UnknownGame(_) | InvalidParameter(_) | Io(_) | InvalidGame(_))
}
