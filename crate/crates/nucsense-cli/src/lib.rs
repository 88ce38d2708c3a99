//! Library surface of the command-line tool: config parsing with overrides,
//! run manifests, and the command implementations. The binary in `main.rs`
//! is a thin argument layer over this.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_experiment, cmd_process, cmd_simulate, CommandOutcome};
pub use config::{apply_env_seed, apply_overrides, from_document, SimulateConfig};
pub use manifest::{config_hash, RunManifest};

use nucsense::Error;

/// Map an error to the documented exit codes: 2 for configuration and input
/// problems, 3 for numerical-integrity failures, 1 otherwise.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidInput { .. }
        | Error::MalformedContainer { .. }
        | Error::Json(_)
        | Error::UnsupportedWaveform(_)
        | Error::Domain(_)
        | Error::EmptySystem { .. }
        | Error::DimensionGuard { .. } => 2,
        Error::NumericalIntegrity { .. } => 3,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code_for(&Error::invalid("x", "y")), 2);
        assert_eq!(
            exit_code_for(&Error::MalformedContainer {
                offset: 3,
                why: "q".into()
            }),
            2
        );
        assert_eq!(
            exit_code_for(&Error::NumericalIntegrity {
                what: "t",
                value: 1.0,
                limit: 0.5
            }),
            3
        );
        assert_eq!(
            exit_code_for(&Error::FitDiverged {
                iterations: 1,
                residual: 0.1
            }),
            1
        );
    }
}
