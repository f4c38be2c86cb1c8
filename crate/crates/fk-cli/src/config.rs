//! JSON run configuration: the on-disk description of one experiment.
//!
//! The schema is versioned and strict: unknown keys, wrong types and
//! unsupported schema revisions are hard errors, reported with the full key
//! path into the document.

use std::fs;
use std::path::{Path, PathBuf};

use fk_core::eigensolve::EigenOptions;
use fk_core::manifold::ChartSpec;
use fk_core::shapeopt::{ShapeOptions, SupportInit};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Config schema revision this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// How the shape iteration starts.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Geodesic ball of the target volume about the domain center.
    #[default]
    Ball,
    /// Geodesic ball about the given chart point.
    BallAt { at: [f64; 2] },
    /// Threshold of a seeded random bump field.
    RandomBlob,
}

/// Outer shape loop and inner eigensolver settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    /// Relative tolerance of the outer loop.
    pub tol: f64,
    pub max_iter: usize,
    /// Geometric retreat factor for rejected steps, in (0, 1).
    pub damping: f64,
    pub seed: u64,
    pub init: InitSpec,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let shape = ShapeOptions::<f64>::default();
        Self {
            tol: shape.tol,
            max_iter: shape.max_iter,
            damping: shape.damping,
            seed: shape.seed,
            init: InitSpec::Ball,
            eigen_tol: shape.eigen.tol,
            eigen_max_iter: shape.eigen.max_iter,
        }
    }
}

impl SolverSpec {
    /// Runtime options for the shape iteration.
    pub fn shape_options(&self) -> ShapeOptions<f64> {
        ShapeOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            seed: self.seed,
            init: match &self.init {
                InitSpec::Ball => SupportInit::Ball,
                InitSpec::BallAt { at } => SupportInit::BallAt(*at),
                InitSpec::RandomBlob => SupportInit::RandomBlob,
            },
            eigen: EigenOptions {
                tol: self.eigen_tol,
                max_iter: self.eigen_max_iter,
                ..EigenOptions::default()
            },
        }
    }
}

/// Diagnostics toggles and the probe radius policy.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    pub enabled: bool,
    /// Most boundary centers probed, taken by constant stride from the
    /// ordered boundary list.
    pub probes: usize,
    /// Geodesic radii per center, geometric between the policy limits.
    pub radii: usize,
    /// Radii dropped from the small end before extrapolating limits; the
    /// dense near-wall samples carry a mesh-scale transient.
    pub drop_smallest: usize,
    /// Gradient band width in grid cells.
    pub band_cells: f64,
    /// Two-phase band parameter for the volume-fraction flags.
    pub delta: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            probes: 24,
            radii: 12,
            drop_smallest: 4,
            band_cells: 3.0,
            delta: 0.1,
        }
    }
}

/// One experiment: chart, grid, target volumes, solver and diagnostics
/// settings, and where to write artifacts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub chart: ChartSpec,
    pub grid: [usize; 2],
    /// Target volume for a single solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    /// Target volumes for a profile sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub volumes: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    /// Write the per-node eigenfunction table next to the manifest.
    #[serde(default = "default_true")]
    pub field_csv: bool,
    /// Run directory; created if missing.
    pub output: PathBuf,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            CliError::Config(format!(
                "{}: key path `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn validate(&self, path: &Path) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(format!("{}: {msg}", path.display())));
        if self.schema != SCHEMA_VERSION {
            return fail(format!(
                "key path `schema`: revision {} unsupported, this build reads {SCHEMA_VERSION}",
                self.schema
            ));
        }
        if self.grid[0] < 8 || self.grid[1] < 8 {
            return fail(format!(
                "key path `grid`: {}x{} is below the 8x8 minimum",
                self.grid[0], self.grid[1]
            ));
        }
        for (key, m) in self
            .volume
            .iter()
            .map(|m| ("volume", *m))
            .chain(self.volumes.iter().map(|m| ("volumes", *m)))
        {
            if !(m > 0.0) || !m.is_finite() {
                return fail(format!("key path `{key}`: volume {m} must be positive"));
            }
        }
        if !(self.solver.damping > 0.0 && self.solver.damping < 1.0) {
            return fail(format!(
                "key path `solver.damping`: {} must lie in (0, 1)",
                self.solver.damping
            ));
        }
        Ok(())
    }

    /// Volume list a command will solve: `volume` for single solves, the
    /// `volumes` sweep for profiles.
    pub fn solve_volumes(&self, profile: bool) -> Result<Vec<f64>, CliError> {
        if profile {
            if !self.volumes.is_empty() {
                return Ok(self.volumes.clone());
            }
            if let Some(m) = self.volume {
                return Ok(vec![m]);
            }
            Err(CliError::Config(
                "key path `volumes`: a profile run needs a volume list".into(),
            ))
        } else {
            if let Some(m) = self.volume {
                return Ok(vec![m]);
            }
            if self.volumes.len() == 1 {
                return Ok(self.volumes.clone());
            }
            Err(CliError::Config(
                "key path `volume`: a solve run needs a single target volume".into(),
            ))
        }
    }
}
