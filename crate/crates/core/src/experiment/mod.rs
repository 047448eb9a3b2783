//! Config-driven experiments that pair a simulation with the matching
//! asymptote and write plot-ready reports.

mod config;
mod run;

pub use config::{ExperimentConfig, ExperimentKind, GridSpec, KindOptions, ModelSection, Regime};
pub use run::{run_experiment, Check, ReportFiles};

use crate::error::Error;

/// Process exit status for a failed run: 2 for configuration and model
/// errors, 3 for simulation and I/O failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. }
        | Error::Parse { .. }
        | Error::InfiniteMean(_)
        | Error::Instability { .. }
        | Error::Config { .. }
        | Error::RvRequired(_)
        | Error::EmptyGrid
        | Error::UnsortedGrid => 2,
        _ => 3,
    }
}

/// Exit status when `--check` finds a failing criterion.
pub const CHECK_FAILED: i32 = 4;

#[cfg(test)]
mod tests;
