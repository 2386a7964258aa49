//! Command-line workflows and the HTTP API for the recourse engine.

pub mod api;
pub mod cli;
pub mod config;
pub mod ops;
pub mod sessions;
pub mod shapes;

pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;
pub const EXIT_CAP: i32 = 4;

/// Process exit code for an error: 2 invalid input, 3 infeasible or
/// unreachable, 4 state cap exceeded, 1 for I/O and anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use recourse_core::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NoRecourse | Error::Unreachable(_) | Error::NoEnabledActions => EXIT_UNREACHABLE,
                Error::StateCap { .. } => EXIT_CAP,
                Error::Io(_) => EXIT_IO,
                _ => EXIT_INVALID_INPUT,
            };
        }
        if cause.is::<serde_json::Error>() || cause.is::<toml::de::Error>() {
            return EXIT_INVALID_INPUT;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_IO
}
