//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::GpError;
use crate::estimator::{estimate, Criterion, EstimatorConfig};
use crate::experiment::bench::{run_benchmark, write_bench, BenchmarkSpec, GradPath};
use crate::experiment::design::generate_design;
use crate::experiment::io::{read_dataset, read_design, write_dataset, write_design, write_sidecar, IoError, SCHEMA_VERSION};
use crate::experiment::scatter::{run_scatter_experiment, summarize, write_scatter, ExperimentSpec};
use crate::experiment::simulate::sample_gp;
use crate::kernels::{KernelFamily, KernelParams};
use crate::loo::Dataset;
use crate::scoring::ScoringRule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "loo-gp", version, about = "Gaussian-process parameter estimation by leave-one-out scoring rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate covariance parameters from a CSV dataset.
    Fit(FitArgs),
    /// Draw observations of a zero-mean GP on a design.
    Simulate(SimulateArgs),
    /// Generate a maximin Latin hypercube design.
    Design(DesignArgs),
    /// Repeated estimation on simulated data, one row per replication and criterion.
    Scatter(ScatterArgs),
    /// Time the adjoint and per-parameter gradient paths.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with header x1,...,xd,z.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "crps")]
    criterion: Criterion,
    #[arg(long, default_value = "se")]
    kernel: KernelFamily,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Noise variance, held fixed unless --estimate-noise is given (then used as the starting scale).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    estimate_noise: bool,
    /// Output JSON file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TruthArgs {
    /// Comma-separated length scales.
    #[arg(long, value_delimiter = ',', required = true)]
    rho: Vec<f64>,
    #[arg(long = "var", default_value_t = 1.0)]
    process_variance: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value = "se")]
    kernel: KernelFamily,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Design CSV with header x1,...,xd; generated from --n and the seed when omitted.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    truth: TruthArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScatterArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    rho: Vec<f64>,
    #[arg(long = "var", default_value_t = 1.0)]
    process_variance: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value = "se")]
    kernel: KernelFamily,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "crps,mle")]
    criteria: Vec<Criterion>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Reuse one design for all replications.
    #[arg(long)]
    fixed_design: bool,
    #[arg(long)]
    estimate_noise: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long = "n", value_delimiter = ',', default_value = "600")]
    n_values: Vec<usize>,
    #[arg(long = "q", value_delimiter = ',', default_value = "3,33")]
    q_values: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "adjoint,naive")]
    paths: Vec<GradPath>,
    #[arg(long, default_value = "crps")]
    rule: ScoringRule,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Io(#[from] IoError),
    #[error("{0}")]
    Gp(#[from] GpError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_USAGE,
            CliError::Gp(GpError::InvalidInput(_) | GpError::DimensionMismatch { .. }) => EXIT_USAGE,
            CliError::Gp(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Serialize)]
struct FitOutput<'a> {
    schema_version: u32,
    command: &'a [String],
    data: &'a Path,
    config: &'a EstimatorConfig,
    fit: &'a crate::estimator::FitResult,
}

fn truth_params(t: &TruthArgs) -> Result<KernelParams, GpError> {
    KernelParams::new(t.kernel, t.process_variance, t.rho.clone(), t.noise)
}

fn run_fit(a: &FitArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let data = read_dataset(&a.data)?;
    let config = EstimatorConfig {
        criterion: a.criterion,
        family: a.kernel,
        n_starts: a.starts,
        max_iterations: a.max_iter,
        estimate_noise: a.estimate_noise,
        noise_variance: a.noise,
        seed: a.seed,
        ..Default::default()
    };
    let fit = estimate(&data, &config)?;
    let doc = FitOutput { schema_version: SCHEMA_VERSION, command: argv, data: &a.data, config: &config, fit: &fit };
    match &a.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| IoError::File { path: path.clone(), source })?;
            serde_json::to_writer_pretty(file, &doc).map_err(IoError::from)?;
            let _ = writeln!(out, "criterion {} = {:.6} (converged: {})", fit.criterion, fit.criterion_value, fit.converged);
        }
        None => {
            let text = serde_json::to_string_pretty(&doc).map_err(IoError::from)?;
            let _ = writeln!(out, "{text}");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSpec<'a> {
    design: Option<&'a Path>,
    n: usize,
    true_params: &'a KernelParams,
    seed: u64,
}

fn run_simulate(a: &SimulateArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let params = truth_params(&a.truth)?;
    let x = match (&a.design, a.n) {
        (Some(path), _) => read_design(path)?,
        (None, Some(n)) if n > 0 => generate_design(n, params.dim(), a.seed),
        _ => return Err(GpError::InvalidInput("simulate needs --design or a positive --n".into()).into()),
    };
    let z = sample_gp(&params, &x, a.seed)?;
    let n = x.nrows();
    write_dataset(&a.out, &Dataset::new(x, z)?)?;
    write_sidecar(&a.out, argv, &SimulateSpec { design: a.design.as_deref(), n, true_params: &params, seed: a.seed })?;
    let _ = writeln!(out, "wrote {} observations to {}", n, a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct DesignSpec {
    n: usize,
    d: usize,
    seed: u64,
}

fn run_design(a: &DesignArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    if a.n == 0 || a.d == 0 {
        return Err(GpError::InvalidInput("design needs n >= 1 and d >= 1".into()).into());
    }
    write_design(&a.out, &generate_design(a.n, a.d, a.seed))?;
    write_sidecar(&a.out, argv, &DesignSpec { n: a.n, d: a.d, seed: a.seed })?;
    let _ = writeln!(out, "wrote {}x{} design to {}", a.n, a.d, a.out.display());
    Ok(())
}

fn run_scatter(a: &ScatterArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let truth = KernelParams::new(a.kernel, a.process_variance, a.rho.clone(), a.noise)?;
    let mut spec = ExperimentSpec::new(a.n, truth, a.reps, a.criteria.clone(), a.seed);
    spec.d = a.d;
    spec.fixed_design = a.fixed_design;
    spec.n_starts = a.starts;
    spec.max_iterations = a.max_iter;
    spec.estimate_noise = a.estimate_noise;
    let rows = run_scatter_experiment(&spec)?;
    write_scatter(&a.out, spec.d, &rows)?;
    write_sidecar(&a.out, argv, &spec)?;
    for s in summarize(&rows, &spec.criteria) {
        let rho = &s.median_estimate.get(1..=spec.d).unwrap_or(&[]);
        let _ = writeln!(
            out,
            "{}: median rho {:?}, converged {:.0}%, failures {}",
            s.criterion,
            rho,
            100.0 * s.converged_fraction,
            s.failures
        );
    }
    Ok(())
}

fn run_bench(a: &BenchArgs, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let mut spec = BenchmarkSpec::new(a.n_values.clone(), a.q_values.clone(), a.reps, a.seed);
    spec.paths = a.paths.clone();
    spec.rule = a.rule;
    let report = run_benchmark(&spec)?;
    write_bench(&a.out, &report.rows)?;
    write_sidecar(&a.out, argv, &serde_json::json!({ "spec": spec, "cells": report.cells, "agreement": report.agreement }))
        .map_err(CliError::from)?;
    for c in &report.cells {
        match c.median_wall_time_s {
            Some(t) => {
                let _ = writeln!(out, "{:>7} n={:<5} q={:<3} median {:.6} s", c.path, c.n, c.q, t);
            }
            None => {
                let _ = writeln!(out, "{:>7} n={:<5} q={:<3} failed", c.path, c.n, c.q);
            }
        }
    }
    for g in &report.agreement {
        let _ = writeln!(out, "n={} q={} adjoint vs naive relative difference {:.3e}", g.n, g.q, g.relative_difference);
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => run_fit(a, &argv, out),
        Command::Simulate(a) => run_simulate(a, &argv, out),
        Command::Design(a) => run_design(a, &argv, out),
        Command::Scatter(a) => run_scatter(a, &argv, out),
        Command::Bench(a) => run_bench(a, &argv, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    run(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
