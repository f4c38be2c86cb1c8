//! Experiment runner around fk-core: config-driven solves and volume
//! profiles, the catenoid ball-drift run, diagnostics sweeps, and flat-table
//! exports, all recorded in reproducible run manifests.

pub mod config;
pub mod drift;
pub mod export;
pub mod manifest;
pub mod runner;

use std::path::PathBuf;

pub use config::RunConfig;
pub use drift::{run_catenoid_drift, DriftOptions, DriftResult};
pub use export::{export_results, ExportFormat};
pub use manifest::{CheckRecord, Manifest, ProbeRecord, SolveRecord};
pub use runner::{run_config, RunKind, RunOutcome};

/// Runner-level failures, mapped onto process exit codes by the binary.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, malformed or out-of-schema config file.
    #[error("config: {0}")]
    Config(String),
    /// Invalid direct command-line arguments.
    #[error("arguments: {0}")]
    Args(String),
    /// A requested ball does not keep the required margin to the chart
    /// truncation.
    #[error(
        "ball at t = {t} with radius {radius:.4} leaves {margin_cells:.1} \
         cells to the truncation edge, need at least {required} "
    )]
    BallTruncation {
        t: f64,
        radius: f64,
        margin_cells: f64,
        required: usize,
    },
    /// No manifest in the run directory.
    #[error("no manifest found in {0}")]
    MissingManifest(PathBuf),
    /// The shape iteration ran out of budget and the run does not allow
    /// unconverged results.
    #[error("solve at m = {m} did not converge within {iterations} iterations")]
    NotConverged { m: f64, iterations: usize },
    #[error(transparent)]
    Core(#[from] fk_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// Process exit code for this failure. Config and argument problems
    /// exit with 2, everything else with 1; 0 is reserved for runs whose
    /// enabled checks all passed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Args(_) => 2,
            _ => 1,
        }
    }
}

/// Thread count for parallel sections: FK_THREADS when set, otherwise the
/// rayon default, never more than the number of independent work items.
pub fn effective_threads(work_items: usize) -> usize {
    let cap = std::env::var("FK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads);
    cap.min(work_items.max(1))
}
