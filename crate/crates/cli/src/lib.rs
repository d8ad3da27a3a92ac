//! Pipeline behind the `eauq` binary: synthesize or ingest data, train ensembles, fine-tune on
//! expert votes, score a fixed test pool under every requested method and write reports.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod output;

pub use config::RunConfig;
pub use experiment::{run_experiment, RunReport};

/// Errors that map to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "EAUQ_OUTPUT_DIR";

/// Exit code for an error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        2
    } else {
        1
    }
}
