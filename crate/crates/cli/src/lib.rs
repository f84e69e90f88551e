//! Configuration-driven driver for the `defectvqe` binary.

pub mod config;
pub mod pipeline;

pub use config::{ConfigError, Mode, RunConfig};
pub use pipeline::{execute, write_artifacts, Artifact, Problem};
