pub mod commands;
pub mod config;

use skipctl::Error;

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Io(_) | Error::Contract(_) | Error::DimensionMismatch { .. } => 2,
        Error::Infeasible { .. } | Error::EmptySet { .. } | Error::UnstableClosedLoop { .. } => 3,
        Error::SafetyViolation { .. } => 4,
        Error::VerificationFailed { .. } | Error::ProvenanceMismatch { .. } => 5,
        Error::Diverged(_) => 1,
    }
}
