//! Subcommands of the `rddm` binary, kept in a library so tests can drive
//! them without spawning processes.

pub mod commands;
pub mod path_experiment;

use rddm_core::error::Error;

/// Process exit status for a finished command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    CheckFailure,
}

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Self::Success => EXIT_SUCCESS,
            Self::CheckFailure => EXIT_CHECK_FAILURE,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_)
        | Error::SingularConversion { .. }
        | Error::VarianceBudget { .. }
        | Error::NonFiniteLoss { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}
