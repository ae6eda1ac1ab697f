//! Library surface of the `fogsim` command-line tool; the binary is a thin
//! wrapper so commands stay testable in-process.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_compress, cmd_datagen, cmd_evaluate, cmd_report, cmd_simulate, cmd_train, load_cohort,
};
pub use config::ExperimentConfig;

/// Process exit codes, documented for scripting: 0 success, 2 configuration
/// error, 3 data error, 4 runtime error.
pub fn exit_code_for(err: &fogsim_core::Error) -> i32 {
    use fogsim_core::Error::*;
    match err {
        InvalidConfig(_) | InfeasibleSchedule(_) => 2,
        Io { .. } | Parse { .. } | InvalidRecording(_) | UnknownChannel(_) | Container(_) => 3,
        ShapeMismatch(_) | Training(_) | Evaluation(_) | Watchdog(_) => 4,
    }
}
