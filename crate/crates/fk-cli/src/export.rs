//! Flat-table writers and the post-hoc export command.
//!
//! Tables are plain comma-separated text with a header row; floats use the
//! shortest exact decimal form, so identical runs serialize identically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fk_core::discretize::DiscreteOperators;
use fk_core::shapeopt::ShapeResult;

use crate::drift::DriftResult;
use crate::manifest::{Manifest, ProbeRecord, SolveRecord};
use crate::CliError;

pub const PROFILE_CSV: &str = "fk_profile.csv";
pub const DRIFT_CSV: &str = "drift.csv";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";

/// Output format of `export_results`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(CliError::Args(format!("unknown format `{other}`, use csv or json"))),
        }
    }
}

/// Rebuilds the flat tables of a completed run from its manifest, in the
/// requested format. Returns the written paths.
pub fn export_results(run_dir: &Path, format: ExportFormat) -> Result<Vec<PathBuf>, CliError> {
    let manifest = Manifest::read(run_dir)?;
    let mut written = Vec::new();

    if !manifest.solves.is_empty() {
        let path = match format {
            ExportFormat::Csv => {
                let p = run_dir.join(PROFILE_CSV);
                write_profile_csv(&p, &manifest.solves)?;
                p
            }
            ExportFormat::Json => {
                let p = run_dir.join("fk_profile.json");
                write_json(&p, &manifest.solves)?;
                p
            }
        };
        written.push(path);
    }

    if let Some(drift) = &manifest.drift {
        let path = match format {
            ExportFormat::Csv => {
                let p = run_dir.join(DRIFT_CSV);
                write_drift_csv(&p, drift)?;
                p
            }
            ExportFormat::Json => {
                let p = run_dir.join("drift.json");
                write_json(&p, drift)?;
                p
            }
        };
        written.push(path);
    }

    if !manifest.probes.is_empty() {
        let path = match format {
            ExportFormat::Csv => {
                let p = run_dir.join(DIAGNOSTICS_CSV);
                write_diagnostics_csv(&p, &manifest.probes)?;
                p
            }
            ExportFormat::Json => {
                let p = run_dir.join("diagnostics.json");
                write_json(&p, &manifest.probes)?;
                p
            }
        };
        written.push(path);
    }

    Ok(written)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Volume profile table, one row per solve.
pub fn write_profile_csv(path: &Path, solves: &[SolveRecord]) -> Result<(), CliError> {
    let mut out = String::from("m,FK,iterations,converged\n");
    for s in solves {
        let _ = writeln!(out, "{},{},{},{}", s.m, s.lambda1, s.iterations, s.converged);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Drift table, one row per ball position.
pub fn write_drift_csv(path: &Path, drift: &DriftResult) -> Result<(), CliError> {
    let mut out = String::from("t,r,lambda,gap\n");
    for k in 0..drift.positions.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            drift.positions[k], drift.radii[k], drift.lambdas[k], drift.gaps[k]
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Diagnostics table, one row per probe center and radius.
pub fn write_diagnostics_csv(path: &Path, probes: &[ProbeRecord]) -> Result<(), CliError> {
    let mut out = String::from("x0,r,phi,theta,Lambda\n");
    for p in probes {
        let _ = writeln!(out, "{},{},{},{},{}", p.center, p.radius, p.phi, p.theta, p.lambda);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-node eigenfunction table of one solve.
pub fn write_field_csv(
    path: &Path,
    ops: &DiscreteOperators<f64>,
    result: &ShapeResult<f64>,
) -> Result<(), CliError> {
    let grid = &ops.grid;
    let mut inside = vec![false; ops.len()];
    for &i in &result.support {
        inside[i] = true;
    }
    let mut out = String::from("x1,x2,u,support\n");
    for idx in 0..ops.len() {
        let p = grid.pos_of(idx);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p[0],
            p[1],
            result.u[idx],
            u8::from(inside[idx])
        );
    }
    fs::write(path, out)?;
    Ok(())
}
