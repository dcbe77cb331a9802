//! Benchmark harness for swarm fusion: architecture comparisons, parameter
//! sweeps and trace plots.

pub mod experiment;
pub mod plot;
pub mod settings;

/// A command-line or config mistake; the binary exits with status 2.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Environment variable that turns on deterministic lock-step runs.
pub const DETERMINISTIC_ENV: &str = "SWARM_DETERMINISTIC";
