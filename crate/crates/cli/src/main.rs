//! `rmps`: sample filtered random MPS ensembles from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod grid;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rmps_core::ensemble::{
    correlation_points, curve_points, field_sweep, run_ensemble, CheckpointSummary,
    CorrelationPoint, CurvePoint, ObservableRequest, RunMetadata, SampleFailure,
};
use rmps_core::output::{
    corr_csv, curve_csv, fits_csv, fits_from_histogram, histogram_csv, histogram_rows, json,
    read_histogram, trace_csv, write_atomic,
};
use rmps_core::sampler::SamplerConfig;
use rmps_core::stats::Estimate;

use config::{Overrides, Resolved};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    Invalid(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn invalid(field: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Invalid(format!("{field}: {reason}"))
    }

    pub fn from_core(e: rmps_core::Error) -> Self {
        use rmps_core::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::InvalidDimension(_)
            | E::TooLarge { .. }
            | E::Format(_) => CliError::Invalid(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rmps",
    version,
    about = "Filtered random-MPS sampling of spin chains at fixed energy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble; writes trace.csv, histogram.csv, fits.csv and run.json.
    Sample {
        #[command(flatten)]
        run: RunArgs,
        /// Also write corr.csv for these separations (`1..6` or `1,2,4`).
        #[arg(long)]
        corr: Option<String>,
    },
    /// One ensemble per field value at fixed E; writes curve.csv and run.json.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `start:stop:step` or a comma list of h values.
        #[arg(long)]
        h_grid: String,
        /// Also write correlation profiles for these separations.
        #[arg(long)]
        corr: Option<String>,
    },
    /// Compare the sampler with exact diagonalization (N <= 12); writes verify.json.
    Verify {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Refit an existing histogram.csv into fits.csv without sampling.
    Histogram {
        /// Path of the histogram.csv to refit.
        #[arg(long)]
        input: PathBuf,
        /// Output directory; defaults to the directory of the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides RMPS_SEED and the config file.
    #[arg(long, env = "RMPS_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides RMPS_THREADS and the config file.
    #[arg(long, env = "RMPS_THREADS")]
    threads: Option<usize>,
    /// Output directory; overrides run.output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// How an automatic sigma is derived; overrides the config file.
    #[arg(long, value_parser = ["bound", "paper", "paper-quarter"])]
    sigma_mode: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<Resolved, CliError> {
        let file = config::load(&self.config)?;
        let overrides = Overrides {
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            sigma_mode: self
                .sigma_mode
                .as_deref()
                .map(config::parse_sigma_mode)
                .transpose()?,
        };
        file.resolve(&overrides)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rmps: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sample { run, corr } => {
            let resolved = run.resolve()?;
            let js = corr
                .as_deref()
                .map(grid::parse_separations)
                .transpose()?
                .unwrap_or_default();
            in_pool(resolved.threads, || cmd_sample(&resolved, js))
        }
        Command::Sweep { run, h_grid, corr } => {
            let resolved = run.resolve()?;
            let grid = grid::parse_h_grid(&h_grid)?;
            let js = corr
                .as_deref()
                .map(grid::parse_separations)
                .transpose()?
                .unwrap_or_default();
            in_pool(resolved.threads, || cmd_sweep(&resolved, &grid, js))
        }
        Command::Verify { run } => {
            let resolved = run.resolve()?;
            in_pool(resolved.threads, || cmd_verify(&resolved))
        }
        Command::Histogram { input, out } => cmd_histogram(&input, out.as_deref()),
    }
}

fn in_pool(
    threads: usize,
    job: impl FnOnce() -> Result<(), CliError> + Send,
) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    pool.install(job)
}

fn write(dir: &Path, name: &str, bytes: rmps_core::Result<Vec<u8>>) -> Result<(), CliError> {
    let bytes = bytes.map_err(|e| CliError::Runtime(e.to_string()))?;
    let path = dir.join(name);
    write_atomic(&path, &bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct SampleReport<'a> {
    command: &'static str,
    config: &'a SamplerConfig,
    metadata: &'a RunMetadata,
    checkpoints: &'a [CheckpointSummary],
    magnetization: Option<Estimate>,
    correlations: &'a [CorrelationPoint],
    failures: &'a [SampleFailure],
}

fn cmd_sample(resolved: &Resolved, js: Vec<usize>) -> Result<(), CliError> {
    let request = ObservableRequest {
        magnetization: true,
        correlations: js,
    };
    let result = run_ensemble(&resolved.sampler, &request).map_err(CliError::from_core)?;
    let dir = &resolved.output_dir;
    let rows = histogram_rows(&result);
    write(dir, "trace.csv", trace_csv(&result))?;
    write(dir, "histogram.csv", histogram_csv(&rows))?;
    write(dir, "fits.csv", fits_csv(&fits_from_histogram(&rows)))?;
    let corr = correlation_points(&result);
    if !request.correlations.is_empty() {
        write(dir, "corr.csv", corr_csv(&corr))?;
    }
    let report = SampleReport {
        command: "sample",
        config: &result.config,
        metadata: &result.metadata,
        checkpoints: &result.checkpoints,
        magnetization: result.magnetization,
        correlations: &corr,
        failures: &result.failures,
    };
    write(dir, "run.json", json(&report))?;
    let e = result
        .checkpoints
        .last()
        .map(|c| c.mean_energy)
        .unwrap_or(f64::NAN);
    println!(
        "{} samples ({} failed), sigma = {}, mean energy at k = {}: {e}",
        result.metadata.sample_count,
        result.metadata.failed_count,
        result.metadata.sigma,
        resolved.sampler.iterations
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    h: f64,
    master_seed: u64,
    metadata: &'a RunMetadata,
    magnetization: Option<Estimate>,
    correlations: Vec<CorrelationPoint>,
    failures: &'a [SampleFailure],
}

#[derive(Serialize)]
struct SweepReport<'a> {
    command: &'static str,
    config: &'a SamplerConfig,
    curve: &'a [CurvePoint],
    points: Vec<SweepEntry<'a>>,
}

fn cmd_sweep(resolved: &Resolved, grid: &[f64], js: Vec<usize>) -> Result<(), CliError> {
    let request = ObservableRequest {
        magnetization: true,
        correlations: js,
    };
    let points = field_sweep(&resolved.sampler, grid, &request).map_err(CliError::from_core)?;
    let dir = &resolved.output_dir;
    let curve = curve_points(&points);
    write(dir, "curve.csv", curve_csv(&curve))?;
    if !request.correlations.is_empty() {
        if let [single] = &points[..] {
            write(
                dir,
                "corr.csv",
                corr_csv(&correlation_points(&single.result)),
            )?;
        } else {
            for (g, p) in points.iter().enumerate() {
                write(
                    dir,
                    &format!("corr_{g}.csv"),
                    corr_csv(&correlation_points(&p.result)),
                )?;
            }
        }
    }
    let report = SweepReport {
        command: "sweep",
        config: &resolved.sampler,
        curve: &curve,
        points: points
            .iter()
            .map(|p| SweepEntry {
                h: p.h,
                master_seed: p.result.config.master_seed,
                metadata: &p.result.metadata,
                magnetization: p.result.magnetization,
                correlations: correlation_points(&p.result),
                failures: &p.result.failures,
            })
            .collect(),
    };
    write(dir, "run.json", json(&report))?;
    for p in &curve {
        println!(
            "h = {}: m_z = {} +- {}",
            p.h,
            p.m_z,
            p.stderr
                .map(|s| s.to_string())
                .unwrap_or_else(|| "n/a".into())
        );
    }
    Ok(())
}

fn cmd_verify(resolved: &Resolved) -> Result<(), CliError> {
    let report = verify::run(&resolved.sampler)?;
    write(&resolved.output_dir, "verify.json", json(&report))?;
    for c in &report.checks {
        println!(
            "{} {}: residual {} (tolerance {}) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.residual
                .map(|x| format!("{x:.3e}"))
                .unwrap_or_else(|| "-".into()),
            c.tolerance
                .map(|x| format!("{x:.3e}"))
                .unwrap_or_else(|| "-".into()),
            c.detail
        );
    }
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Runtime("verification failed".into()))
    }
}

fn cmd_histogram(input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let rows = read_histogram(input).map_err(|e| match e {
        rmps_core::Error::Io(_) | rmps_core::Error::Csv(_) => {
            CliError::Invalid(format!("cannot read {}: {e}", input.display()))
        }
        other => CliError::from_core(other),
    })?;
    let fits = fits_from_histogram(&rows);
    if fits.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no checkpoint has two or more energies",
            input.display()
        )));
    }
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| match input.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        });
    write(&dir, "fits.csv", fits_csv(&fits))
}
