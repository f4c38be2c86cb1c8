use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fk_cli::{export_results, run_config, runner::run_drift, CliError, DriftOptions, RunKind};

#[derive(Parser)]
#[command(
    name = "fk",
    version,
    about = "Constrained first-eigenvalue minimization on metric charts: \
             solves, volume profiles, catenoid drift runs and exports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one volume-constrained solve from a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Record an unconverged solve instead of failing.
        #[arg(long)]
        allow_nonconverged: bool,
    },
    /// Solve every volume in the config's list and tabulate the profile.
    Profile {
        #[arg(long)]
        config: PathBuf,
        /// Record unconverged solves instead of failing.
        #[arg(long)]
        allow_nonconverged: bool,
    },
    /// Slide volume-m geodesic balls along a catenoid and record the
    /// eigenvalue drift toward the flat floor.
    Drift {
        /// Neck radius of the catenoid.
        #[arg(long)]
        neck: f64,
        /// Ball volume m.
        #[arg(long)]
        volume: f64,
        /// Ball center heights, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        positions: Vec<f64>,
        /// Full chart grid as <n1>x<n2>.
        #[arg(long, value_parser = parse_grid)]
        grid: [usize; 2],
        /// Half-height T of the truncated chart, |t| < T.
        #[arg(long)]
        truncation: f64,
        /// Run directory for the manifest and drift table.
        #[arg(long)]
        out: PathBuf,
        /// Polar ball grid as <n_alpha>x<n_rho>.
        #[arg(long, value_parser = parse_grid, default_value = "192x192")]
        polar: [usize; 2],
    },
    /// Rebuild the flat tables of a completed run from its manifest.
    Export {
        /// Run directory holding a manifest.
        #[arg(long)]
        run: PathBuf,
        /// Table format: csv or json.
        #[arg(long)]
        format: String,
    },
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("`{s}` is not of the form <n1>x<n2>"))?;
    let n1 = a.trim().parse::<usize>().map_err(|e| format!("`{a}`: {e}"))?;
    let n2 = b.trim().parse::<usize>().map_err(|e| format!("`{b}`: {e}"))?;
    Ok([n1, n2])
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve { config, allow_nonconverged } => {
            report(run_config(&config, RunKind::Solve, allow_nonconverged)?)
        }
        Command::Profile { config, allow_nonconverged } => {
            report(run_config(&config, RunKind::Profile, allow_nonconverged)?)
        }
        Command::Drift { neck, volume, positions, grid, truncation, out, polar } => {
            let opts = DriftOptions { polar_n: polar, ..Default::default() };
            report(run_drift(neck, volume, &positions, grid, truncation, &opts, &out)?)
        }
        Command::Export { run, format } => {
            let files = export_results(&run, format.parse()?)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
    }
}

fn report(outcome: fk_cli::RunOutcome) -> Result<i32, CliError> {
    for s in &outcome.manifest.solves {
        println!(
            "m = {}: lambda1 = {} ({} iterations, {})",
            s.m,
            s.lambda1,
            s.iterations,
            if s.converged { "converged" } else { "not converged" }
        );
    }
    if let Some(d) = &outcome.manifest.drift {
        for k in 0..d.positions.len() {
            println!(
                "t = {}: r = {}, lambda1 = {}, gap = {}",
                d.positions[k], d.radii[k], d.lambdas[k], d.gaps[k]
            );
        }
    }
    for c in &outcome.manifest.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("manifest: {}", outcome.manifest_path.display());
    Ok(outcome.exit_code())
}
