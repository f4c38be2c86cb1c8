//! Config execution: volume-constrained solves, profile sweeps, diagnostics
//! probes, drift orchestration, and all per-run artifacts.

use std::path::{Path, PathBuf};

use fk_core::diagnostics::{
    boundary_nodes, density_formula_check, density_profile, lagrange_multiplier_estimate,
    profile_radii, weiss_profile,
};
use fk_core::discretize::{assemble_operators, DiscreteOperators};
use fk_core::manifold::MetricChart;
use fk_core::shapeopt::{fk_minimize, ShapeResult};
use rayon::prelude::*;

use crate::config::{DiagnosticsSpec, RunConfig};
use crate::drift::{run_catenoid_drift, DriftOptions};
use crate::export;
use crate::manifest::{CheckRecord, Manifest, ProbeRecord, SolveRecord};
use crate::{effective_threads, CliError};

/// Acceptance band for the extrapolated ball-energy ratio phi0 / (Lambda pi)
/// at a regular boundary point.
const WEISS_RATIO_BAND: (f64, f64) = (0.4, 0.6);

/// Lower bound for the extrapolated volume fraction at boundary points.
const DENSITY_GAP_MIN: f64 = 0.45;

/// Largest tolerated residual between the volume fraction and the
/// energy-ratio prediction.
const FORMULA_RESIDUAL_MAX: f64 = 0.1;

/// Largest tolerated band dispersion of the multiplier estimate.
const DISPERSION_MAX: f64 = 0.15;

/// Largest tolerated relative disagreement between the band multiplier and
/// the one implied by the extrapolated profiles.
const CROSS_CHECK_MAX: f64 = 0.15;

/// Relative tolerance of the eigenvalue-energy consistency check.
const ENERGY_TOL: f64 = 1e-3;

/// Which config-driven command is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    /// One solve at `volume`.
    Solve,
    /// One solve per entry of `volumes`.
    Profile,
}

impl RunKind {
    fn name(self) -> &'static str {
        match self {
            RunKind::Solve => "solve",
            RunKind::Profile => "profile",
        }
    }
}

/// A finished run: the manifest and where it was written.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

impl RunOutcome {
    /// Process exit code under the check contract: zero iff every enabled
    /// check passed.
    pub fn exit_code(&self) -> i32 {
        if self.manifest.all_passed() {
            0
        } else {
            1
        }
    }
}

/// Executes a config file: solves every requested volume, runs the enabled
/// diagnostics, writes the manifest and flat tables into the output
/// directory.
pub fn run_config(
    path: &Path,
    kind: RunKind,
    allow_nonconverged: bool,
) -> Result<RunOutcome, CliError> {
    let cfg = RunConfig::load(path)?;
    let volumes = cfg.solve_volumes(kind == RunKind::Profile)?;

    let chart: MetricChart<f64> = cfg.chart.build()?;
    let ops = assemble_operators(&chart, cfg.grid)?;
    let shape_opts = cfg.solver.shape_options();

    let threads = effective_threads(volumes.len());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let results: Vec<ShapeResult<f64>> = pool.install(|| {
        volumes
            .par_iter()
            .map(|&m| fk_minimize(&chart, &ops, m, &shape_opts).map_err(CliError::from))
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    for (&m, result) in volumes.iter().zip(&results) {
        if !result.converged && !allow_nonconverged {
            return Err(CliError::NotConverged { m, iterations: result.trace.len() });
        }
    }

    let mut manifest =
        Manifest::new(kind.name(), threads, serde_json::to_value(&cfg)?);
    let mut probes: Vec<ProbeRecord> = Vec::new();

    for (&m, result) in volumes.iter().zip(&results) {
        let mut record = solve_record(&ops, m, result);

        if !allow_nonconverged {
            manifest.checks.push(CheckRecord::new(
                "converged",
                result.converged,
                format!("m = {m}: {} iterations", result.trace.len()),
            ));
        }
        manifest.checks.push(volume_check(&ops, m, result));
        manifest.checks.push(energy_check(&ops, m, result));

        if cfg.diagnostics.enabled && result.converged {
            let sweep = boundary_sweep(&chart, &ops, result, &cfg.diagnostics, m)?;
            record.multiplier = Some(sweep.lambda);
            probes.extend(sweep.rows);
            manifest.checks.extend(sweep.checks);
        }

        manifest.solves.push(record);
    }

    // Artifacts: per-solve field tables, then the flat report tables.
    std::fs::create_dir_all(&cfg.output)?;
    if cfg.field_csv {
        for (k, result) in results.iter().enumerate() {
            let name = if volumes.len() == 1 {
                "field.csv".to_string()
            } else {
                format!("field_{k:02}.csv")
            };
            export::write_field_csv(&cfg.output.join(&name), &ops, result)?;
            manifest.artifacts.push(name);
        }
    }
    export::write_profile_csv(&cfg.output.join(export::PROFILE_CSV), &manifest.solves)?;
    manifest.artifacts.push(export::PROFILE_CSV.into());
    if !probes.is_empty() {
        export::write_diagnostics_csv(&cfg.output.join(export::DIAGNOSTICS_CSV), &probes)?;
        manifest.artifacts.push(export::DIAGNOSTICS_CSV.into());
    }
    manifest.probes = probes;

    let manifest_path = manifest.write(&cfg.output)?;
    Ok(RunOutcome { manifest, manifest_path })
}

/// Executes a drift run and writes its manifest and table.
#[allow(clippy::too_many_arguments)]
pub fn run_drift(
    neck: f64,
    m: f64,
    positions: &[f64],
    grid: [usize; 2],
    t_max: f64,
    opts: &DriftOptions,
    out_dir: &Path,
) -> Result<RunOutcome, CliError> {
    let threads = effective_threads(positions.len());
    let result = run_catenoid_drift(neck, m, positions, grid, t_max, opts)?;

    let config = serde_json::json!({
        "neck": neck,
        "volume": m,
        "positions": result.positions,
        "grid": grid,
        "truncation": t_max,
        "polar_n": opts.polar_n,
    });
    let mut manifest = Manifest::new("drift", threads, config);
    manifest.checks = result.checks(opts.eigen.tol);

    std::fs::create_dir_all(out_dir)?;
    export::write_drift_csv(&out_dir.join(export::DRIFT_CSV), &result)?;
    manifest.artifacts.push(export::DRIFT_CSV.into());
    manifest.drift = Some(result);

    let manifest_path = manifest.write(out_dir)?;
    Ok(RunOutcome { manifest, manifest_path })
}

fn solve_record(ops: &DiscreteOperators<f64>, m: f64, result: &ShapeResult<f64>) -> SolveRecord {
    SolveRecord {
        m,
        lambda1: result.lambda1,
        volume: result.volume,
        iterations: result.trace.len(),
        converged: result.converged,
        energy: ops.rayleigh(&result.u),
        multiplier: None,
        support_nodes: result.support.len(),
    }
}

fn volume_check(ops: &DiscreteOperators<f64>, m: f64, result: &ShapeResult<f64>) -> CheckRecord {
    let cell = result
        .support
        .iter()
        .map(|&i| ops.mass.diag[i])
        .fold(0.0f64, f64::max);
    let err = (result.volume - m).abs();
    CheckRecord::new(
        "volume_within_cell",
        err <= cell,
        format!("m = {m}: |vol - m| = {err:.3e}, cell = {cell:.3e}"),
    )
}

fn energy_check(ops: &DiscreteOperators<f64>, m: f64, result: &ShapeResult<f64>) -> CheckRecord {
    let energy = ops.rayleigh(&result.u);
    let rel = (result.lambda1 - energy).abs() / result.lambda1;
    CheckRecord::new(
        "energy_consistency",
        rel <= ENERGY_TOL,
        format!("m = {m}: |lambda - energy| / lambda = {rel:.3e}"),
    )
}

struct SweepOutput {
    rows: Vec<ProbeRecord>,
    checks: Vec<CheckRecord>,
    lambda: f64,
}

/// Probes strided boundary centers of one converged solve: full-range rows
/// for the tables, plus extrapolated checks fitted above the mesh-scale
/// transient window.
fn boundary_sweep(
    chart: &MetricChart<f64>,
    ops: &DiscreteOperators<f64>,
    result: &ShapeResult<f64>,
    spec: &DiagnosticsSpec,
    m: f64,
) -> Result<SweepOutput, CliError> {
    let h = ops.grid.axis1.spacing.max(ops.grid.axis2.spacing);
    let est = lagrange_multiplier_estimate(chart, ops, result, spec.band_cells * h)?;

    let mut checks = vec![
        CheckRecord::new(
            "multiplier_positive",
            est.lambda > 0.0,
            format!("m = {m}: Lambda = {:.4}", est.lambda),
        ),
        CheckRecord::new(
            "multiplier_dispersion",
            est.dispersion < DISPERSION_MAX,
            format!("m = {m}: dispersion = {:.4}", est.dispersion),
        ),
    ];

    let centers = strided(boundary_nodes(&ops.grid, &result.support)?, spec.probes);

    let mut rows = Vec::new();
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut min_theta0 = f64::INFINITY;
    let mut max_resid: f64 = 0.0;
    let mut max_cross: f64 = 0.0;
    let mut drift_finite = true;
    let mut theta_in_band = true;
    let mut probed = 0usize;

    for &x0 in &centers {
        // Centers without room for the radius policy (too close to a
        // truncation edge) are skipped, not fatal.
        let radii = match profile_radii(chart, ops, x0, spec.radii) {
            Ok(r) => r,
            Err(_) => continue,
        };
        probed += 1;

        let prof = weiss_profile(chart, ops, result, x0, &radii, est.lambda)?;
        let dens = density_profile(chart, ops, &result.support, x0, &radii, spec.delta)?;
        drift_finite &= prof.drift.is_finite();
        theta_in_band &= dens.within_bounds.iter().all(|&b| b);
        for ((&r, &phi), &theta) in radii.iter().zip(&prof.phi).zip(&dens.theta) {
            rows.push(ProbeRecord { m, center: x0, radius: r, phi, theta, lambda: est.lambda });
        }

        let cut = spec.drop_smallest.min(radii.len().saturating_sub(3));
        let window = &radii[cut..];
        let prof_w = weiss_profile(chart, ops, result, x0, window, est.lambda)?;
        let dens_w = density_profile(chart, ops, &result.support, x0, window, spec.delta)?;
        let ratio = prof_w.phi0 / (est.lambda * std::f64::consts::PI);
        ratio_range = (ratio_range.0.min(ratio), ratio_range.1.max(ratio));
        min_theta0 = min_theta0.min(dens_w.theta0);
        max_resid = max_resid.max(density_formula_check(&prof_w, &dens_w));
        let lam_star = prof_w.phi0 / (dens_w.theta0 * std::f64::consts::PI);
        max_cross = max_cross.max((lam_star / est.lambda - 1.0).abs());
    }

    checks.push(CheckRecord::new(
        "boundary_probed",
        probed > 0,
        format!("m = {m}: {probed} of {} centers probed", centers.len()),
    ));
    checks.push(CheckRecord::new(
        "weiss_drift_finite",
        drift_finite,
        format!("m = {m}"),
    ));
    checks.push(CheckRecord::new(
        "weiss_ratio_band",
        ratio_range.0 >= WEISS_RATIO_BAND.0 && ratio_range.1 <= WEISS_RATIO_BAND.1,
        format!("m = {m}: phi0 / (Lambda pi) in [{:.4}, {:.4}]", ratio_range.0, ratio_range.1),
    ));
    checks.push(CheckRecord::new(
        "density_theta_bounds",
        theta_in_band,
        format!("m = {m}: band delta = {}", spec.delta),
    ));
    checks.push(CheckRecord::new(
        "density_gap",
        min_theta0 >= DENSITY_GAP_MIN,
        format!("m = {m}: min theta0 = {min_theta0:.4}"),
    ));
    checks.push(CheckRecord::new(
        "density_formula_residual",
        max_resid <= FORMULA_RESIDUAL_MAX,
        format!("m = {m}: max residual = {max_resid:.4}"),
    ));
    checks.push(CheckRecord::new(
        "multiplier_cross_check",
        max_cross <= CROSS_CHECK_MAX,
        format!("m = {m}: max relative disagreement = {max_cross:.4}"),
    ));

    Ok(SweepOutput { rows, checks, lambda: est.lambda })
}

fn strided(nodes: Vec<usize>, cap: usize) -> Vec<usize> {
    if nodes.len() <= cap.max(1) {
        return nodes;
    }
    let step = nodes.len() as f64 / cap as f64;
    (0..cap).map(|k| nodes[(k as f64 * step) as usize]).collect()
}
