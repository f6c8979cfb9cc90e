//! Repeated estimation of length scales on simulated data, one row per
//! (replication, criterion).

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::estimator::{estimate, Criterion, EstimatorConfig};
use crate::experiment::design::generate_design;
use crate::experiment::io::IoError;
use crate::experiment::map_jobs;
use crate::experiment::simulate::sample_gp;
use crate::kernels::KernelParams;
use crate::loo::Dataset;
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub d: usize,
    pub true_params: KernelParams,
    pub n_replications: usize,
    pub criteria: Vec<Criterion>,
    pub seed: u64,
    /// Reuse a single design for every replication.
    pub fixed_design: bool,
    pub n_starts: usize,
    pub max_iterations: usize,
    pub estimate_noise: bool,
}

impl ExperimentSpec {
    pub fn new(n: usize, true_params: KernelParams, n_replications: usize, criteria: Vec<Criterion>, seed: u64) -> Self {
        let defaults = EstimatorConfig::default();
        ExperimentSpec {
            n,
            d: true_params.dim(),
            true_params,
            n_replications,
            criteria,
            seed,
            fixed_design: false,
            n_starts: defaults.n_starts,
            max_iterations: defaults.max_iterations,
            estimate_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(GpError::InvalidInput(format!("design size must be at least 10, got {}", self.n)));
        }
        if self.n_replications == 0 || self.criteria.is_empty() {
            return Err(GpError::InvalidInput("need at least one replication and one criterion".into()));
        }
        if self.true_params.dim() != self.d {
            return Err(GpError::DimensionMismatch { context: "true length scales", expected: self.d, found: self.true_params.dim() });
        }
        if self.estimate_noise && self.true_params.noise_variance == 0.0 {
            return Err(GpError::InvalidInput("cannot estimate the noise variance of noiseless data".into()));
        }
        self.true_params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub replication: usize,
    pub criterion: Criterion,
    /// `(process_variance, ρ_1, …, ρ_d, noise_variance)` when the fit succeeded.
    pub estimate: Option<Vec<f64>>,
    pub criterion_value: Option<f64>,
    pub converged: bool,
    pub n_iterations: usize,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

fn replication_rows(spec: &ExperimentSpec, r: usize) -> Vec<ScatterRow> {
    let design_index = if spec.fixed_design { 0 } else { r as u64 };
    let x = generate_design(spec.n, spec.d, derive_seed(spec.seed, Stream::Design, design_index));
    let data = sample_gp(&spec.true_params, &x, derive_seed(spec.seed, Stream::Sample, r as u64))
        .and_then(|z| Dataset::new(x, z));
    let estimator_seed = derive_seed(spec.seed, Stream::Estimator, r as u64);
    spec.criteria
        .iter()
        .map(|&criterion| {
            let config = EstimatorConfig {
                criterion,
                family: spec.true_params.family,
                n_starts: spec.n_starts,
                max_iterations: spec.max_iterations,
                estimate_noise: spec.estimate_noise,
                noise_variance: spec.true_params.noise_variance,
                seed: estimator_seed,
                ..Default::default()
            };
            let start = Instant::now();
            let fit = data.as_ref().map_err(Clone::clone).and_then(|data| estimate(data, &config));
            let wall_time_s = start.elapsed().as_secs_f64();
            match fit {
                Ok(fit) => {
                    let mut theta = vec![fit.params.process_variance];
                    theta.extend_from_slice(&fit.params.length_scales);
                    theta.push(fit.params.noise_variance);
                    ScatterRow {
                        replication: r,
                        criterion,
                        estimate: Some(theta),
                        criterion_value: Some(fit.criterion_value),
                        converged: fit.converged,
                        n_iterations: fit.n_iterations,
                        wall_time_s,
                        error: None,
                    }
                }
                Err(e) => ScatterRow {
                    replication: r,
                    criterion,
                    estimate: None,
                    criterion_value: None,
                    converged: false,
                    n_iterations: 0,
                    wall_time_s,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Runs every replication; per-replication failures become rows with an `error`.
pub fn run_scatter_experiment(spec: &ExperimentSpec) -> Result<Vec<ScatterRow>> {
    spec.validate()?;
    let mut rows: Vec<ScatterRow> = map_jobs(spec.n_replications, |r| replication_rows(spec, r)).into_iter().flatten().collect();
    let order = |c: Criterion| spec.criteria.iter().position(|&k| k == c);
    rows.sort_by_key(|row| (row.replication, order(row.criterion)));
    Ok(rows)
}

pub fn scatter_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["replication", "criterion", "process_variance"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=d).map(|m| format!("rho_{m}")));
    h.extend(["noise_variance", "criterion_value", "converged", "n_iterations", "wall_time_s", "error"].iter().map(|s| s.to_string()));
    h
}

pub fn write_scatter_csv<W: std::io::Write>(writer: W, d: usize, rows: &[ScatterRow]) -> std::result::Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(scatter_header(d))?;
    for row in rows {
        let mut rec = vec![row.replication.to_string(), row.criterion.to_string()];
        match &row.estimate {
            Some(theta) => rec.extend(theta.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), d + 2)),
        }
        rec.push(row.criterion_value.map(|v| v.to_string()).unwrap_or_default());
        rec.push(row.converged.to_string());
        rec.push(row.n_iterations.to_string());
        rec.push(format!("{:.6}", row.wall_time_s));
        rec.push(row.error.clone().unwrap_or_default());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|source| IoError::File { path: "<scatter>".into(), source })?;
    Ok(())
}

pub fn write_scatter(path: &Path, d: usize, rows: &[ScatterRow]) -> std::result::Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(|source| IoError::File { path: path.to_owned(), source })?;
    write_scatter_csv(file, d, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: Criterion,
    /// Componentwise median of the estimates, in the row layout.
    pub median_estimate: Vec<f64>,
    pub converged_fraction: f64,
    pub failures: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn summarize(rows: &[ScatterRow], criteria: &[Criterion]) -> Vec<CriterionSummary> {
    criteria
        .iter()
        .map(|&criterion| {
            let mine: Vec<&ScatterRow> = rows.iter().filter(|r| r.criterion == criterion).collect();
            let estimates: Vec<&Vec<f64>> = mine.iter().filter_map(|r| r.estimate.as_ref()).collect();
            let width = estimates.first().map_or(0, |e| e.len());
            CriterionSummary {
                criterion,
                median_estimate: (0..width).map(|j| median(estimates.iter().map(|e| e[j]).collect())).collect(),
                converged_fraction: mine.iter().filter(|r| r.converged).count() as f64 / mine.len().max(1) as f64,
                failures: mine.iter().filter(|r| r.error.is_some()).count(),
            }
        })
        .collect()
}
