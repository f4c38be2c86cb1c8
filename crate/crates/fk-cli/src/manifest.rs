//! Run manifests: one JSON document per run directory recording the
//! effective inputs, all numeric results, check outcomes and artifact names.
//!
//! Identical runs (same config, seed and thread count) must produce
//! byte-identical manifests except for the `timestamp` field, so every
//! field here either comes from the config or from deterministic numerics.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::drift::DriftResult;
use crate::CliError;

/// Manifest file name inside a run directory.
pub const MANIFEST_NAME: &str = "manifest.json";

/// Outcome of one enabled invariant check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckRecord {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

/// One volume-constrained solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRecord {
    /// Target volume.
    pub m: f64,
    pub lambda1: f64,
    /// Converged support volume.
    pub volume: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dirichlet energy of the mass-normalized eigenfunction.
    pub energy: f64,
    /// Gradient-band multiplier estimate, when diagnostics ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<f64>,
    pub support_nodes: usize,
}

/// One diagnostics table row: a boundary probe center and radius with the
/// ball energy value, the support volume fraction and the band multiplier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeRecord {
    /// Target volume of the solve this probe belongs to.
    pub m: f64,
    /// Probe center, a global node index on the boundary.
    pub center: usize,
    pub radius: f64,
    pub phi: f64,
    pub theta: f64,
    pub lambda: f64,
}

/// Everything a run records besides the flat tables themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: u32,
    /// Wall clock seconds since the Unix epoch at write time. The only
    /// field allowed to differ between identical runs.
    pub timestamp: u64,
    /// Tool name and version that produced the run.
    pub tool: String,
    /// Subcommand that produced the run.
    pub command: String,
    /// Thread count the run was capped at.
    pub threads: usize,
    /// Canonical echo of the effective configuration.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solves: Vec<SolveRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeRecord>,
    /// Enabled invariant checks; the process exits 0 iff all passed.
    pub checks: Vec<CheckRecord>,
    /// File names written into the run directory, manifest excluded.
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, threads: usize, config: serde_json::Value) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            schema: crate::config::SCHEMA_VERSION,
            timestamp,
            tool: format!("fk {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            threads,
            config,
            solves: Vec::new(),
            drift: None,
            probes: Vec::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Writes the manifest into the run directory, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Reads the manifest of a completed run directory.
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_NAME);
        if !path.is_file() {
            return Err(CliError::MissingManifest(dir.to_path_buf()));
        }
        let text = fs::read_to_string(&path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_its_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("solve", 1, serde_json::json!({"volume": 0.5}));
        m.solves.push(SolveRecord {
            m: 0.5,
            lambda1: 36.3,
            volume: 0.5,
            iterations: 11,
            converged: true,
            energy: 36.3,
            multiplier: Some(72.7),
            support_nodes: 123,
        });
        m.checks.push(CheckRecord::new("volume_within_cell", true, "ok".into()));
        m.write(dir.path()).unwrap();
        let back = Manifest::read(dir.path()).unwrap();
        assert_eq!(back.solves.len(), 1);
        assert!(back.all_passed());
    }

    #[test]
    fn missing_manifest_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = Manifest::read(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no manifest found"));
    }
}
