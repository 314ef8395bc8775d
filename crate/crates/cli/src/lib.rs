//! Reproduction harness for the quantum autoencoder experiments: config
//! loading, seeded experiment drivers, and plain-text matrix files.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod matrix_file;
pub mod seeds;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::{run, ExperimentError};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "QAE_OUTPUT_ROOT";

impl ExperimentError {
    /// Process exit code: 1 for bad configuration or input, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Io { .. } => 2,
            _ => 1,
        }
    }
}
