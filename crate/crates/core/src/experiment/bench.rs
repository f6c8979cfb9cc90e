//! Timing of the adjoint and per-parameter gradient paths.
//!
//! The parameter count `q` is varied by embedding the design in
//! `d = q − 1` dimensions (process variance plus one length scale each).

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adjoint::{criterion_with_gradient, naive_gradient, NAIVE_DEFAULT_CAP};
use crate::alloc_audit;
use crate::error::{GpError, Result};
use crate::experiment::design::latin_hypercube;
use crate::experiment::io::IoError;
use crate::experiment::simulate::sample_gp;
use crate::kernels::{KernelFamily, KernelParams};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scoring::ScoringRule;

pub const WARMUP_EVALUATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradPath {
    Adjoint,
    Naive,
}

impl GradPath {
    pub fn name(self) -> &'static str {
        match self {
            GradPath::Adjoint => "adjoint",
            GradPath::Naive => "naive",
        }
    }
}

impl std::fmt::Display for GradPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GradPath {
    type Err = GpError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adjoint" => Ok(GradPath::Adjoint),
            "naive" => Ok(GradPath::Naive),
            other => Err(GpError::InvalidInput(format!("unknown gradient path '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub n_values: Vec<usize>,
    pub q_values: Vec<usize>,
    pub repetitions: usize,
    pub paths: Vec<GradPath>,
    pub seed: u64,
    pub rule: ScoringRule,
    pub family: KernelFamily,
    pub noise_variance: f64,
}

impl BenchmarkSpec {
    pub fn new(n_values: Vec<usize>, q_values: Vec<usize>, repetitions: usize, seed: u64) -> Self {
        BenchmarkSpec {
            n_values,
            q_values,
            repetitions,
            paths: vec![GradPath::Adjoint, GradPath::Naive],
            seed,
            rule: ScoringRule::Crps,
            family: KernelFamily::SquaredExponential,
            noise_variance: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.q_values.is_empty() || self.paths.is_empty() || self.repetitions == 0 {
            return Err(GpError::InvalidInput("benchmark needs n values, q values, paths and repetitions".into()));
        }
        if let Some(&q) = self.q_values.iter().find(|&&q| q < 2) {
            return Err(GpError::InvalidInput(format!("q must be at least 2, got {q}")));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(GpError::InvalidInput(format!("n must be at least 2, got {n}")));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(GpError::InvalidInput("benchmark noise variance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub path: GradPath,
    pub n: usize,
    pub q: usize,
    pub repetition: usize,
    pub wall_time_s: f64,
    /// Most `n × n` blocks alive at once; zero without the counting allocator.
    pub peak_nxn_live: usize,
    pub max_allocation_bytes: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub path: GradPath,
    pub n: usize,
    pub q: usize,
    pub median_wall_time_s: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAgreement {
    pub n: usize,
    pub q: usize,
    /// `‖g_adjoint − g_naive‖∞ / ‖g_naive‖∞`.
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub cells: Vec<CellSummary>,
    pub agreement: Vec<CellAgreement>,
}

impl BenchReport {
    pub fn median(&self, path: GradPath, n: usize, q: usize) -> Option<f64> {
        self.cells.iter().find(|c| c.path == path && c.n == n && c.q == q).and_then(|c| c.median_wall_time_s)
    }
}

/// The benchmark problem for one `(n, q)` cell.
pub fn bench_problem(spec: &BenchmarkSpec, n: usize, q: usize) -> Result<(KernelParams, DMatrix<f64>, DVector<f64>)> {
    let d = q - 1;
    let cell = ((n as u64) << 16) | q as u64;
    // Plain Latin hypercube, no maximin swaps.
    let x = latin_hypercube(n, d, &mut stream_rng(spec.seed, Stream::Bench, cell));
    let rho = 0.5 * (d as f64).sqrt();
    let params = KernelParams::new(spec.family, 1.0, vec![rho; d], spec.noise_variance)?;
    let z = sample_gp(&params, &x, derive_seed(spec.seed, Stream::Sample, cell))?;
    Ok((params, x, z))
}

fn run_path(path: GradPath, rule: ScoringRule, p: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    match path {
        GradPath::Adjoint => criterion_with_gradient(p, x, z, rule),
        GradPath::Naive => naive_gradient(p, x, z, rule),
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Runs every `(n, q, path)` cell serially so timings do not contend.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchReport> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut agreement = Vec::new();
    for &n in &spec.n_values {
        for &q in &spec.q_values {
            let problem = bench_problem(spec, n, q);
            let mut grads: Vec<(GradPath, Vec<f64>)> = Vec::new();
            for &path in &spec.paths {
                let mut times = Vec::new();
                let mut failures = 0;
                let outcome = match &problem {
                    Err(e) => Err(e.clone()),
                    Ok(_) if path == GradPath::Naive && n > NAIVE_DEFAULT_CAP => {
                        Err(GpError::InvalidInput(format!("naive path skipped above n = {NAIVE_DEFAULT_CAP}")))
                    }
                    Ok((p, x, z)) => (0..WARMUP_EVALUATIONS).try_fold(Vec::new(), |_, _| run_path(path, spec.rule, p, x, z).map(|r| r.1)),
                };
                match outcome {
                    Err(e) => {
                        failures = spec.repetitions;
                        rows.extend((0..spec.repetitions).map(|repetition| BenchRow {
                            path,
                            n,
                            q,
                            repetition,
                            wall_time_s: f64::NAN,
                            peak_nxn_live: 0,
                            max_allocation_bytes: 0,
                            error: Some(e.to_string()),
                        }));
                    }
                    Ok(grad) => {
                        let (p, x, z) = problem.as_ref().expect("problem built");
                        grads.push((path, grad));
                        for repetition in 0..spec.repetitions {
                            alloc_audit::reset(n * n * std::mem::size_of::<f64>());
                            let start = Instant::now();
                            let result = run_path(path, spec.rule, p, x, z);
                            let wall_time_s = start.elapsed().as_secs_f64();
                            let stats = alloc_audit::snapshot();
                            let error = result.err().map(|e| e.to_string());
                            if error.is_some() {
                                failures += 1;
                            } else {
                                times.push(wall_time_s);
                            }
                            rows.push(BenchRow {
                                path,
                                n,
                                q,
                                repetition,
                                wall_time_s,
                                peak_nxn_live: stats.peak_large_live,
                                max_allocation_bytes: stats.max_allocation_bytes,
                                error,
                            });
                        }
                    }
                }
                cells.push(CellSummary { path, n, q, median_wall_time_s: median(times), failures });
            }
            let adj = grads.iter().find(|g| g.0 == GradPath::Adjoint);
            let naive = grads.iter().find(|g| g.0 == GradPath::Naive);
            if let (Some((_, a)), Some((_, b))) = (adj, naive) {
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                let diff = a.iter().zip(b).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
                agreement.push(CellAgreement { n, q, relative_difference: diff / scale });
            }
        }
    }
    Ok(BenchReport { rows, cells, agreement })
}

pub fn write_bench_csv<W: std::io::Write>(writer: W, rows: &[BenchRow]) -> std::result::Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["path", "n", "q", "repetition", "wall_time_s", "peak_nxn_live", "max_allocation_bytes", "error"])?;
    for r in rows {
        wtr.write_record([
            r.path.to_string(),
            r.n.to_string(),
            r.q.to_string(),
            r.repetition.to_string(),
            if r.wall_time_s.is_nan() { String::new() } else { format!("{:.9}", r.wall_time_s) },
            r.peak_nxn_live.to_string(),
            r.max_allocation_bytes.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|source| IoError::File { path: "<bench>".into(), source })?;
    Ok(())
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> std::result::Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(|source| IoError::File { path: path.to_owned(), source })?;
    write_bench_csv(file, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_produces_rows_and_agreement() {
        let spec = BenchmarkSpec::new(vec![20, 30], vec![2, 4], 3, 1);
        let report = run_benchmark(&spec).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 2 * 3);
        assert_eq!(report.cells.len(), 8);
        assert!(report.cells.iter().all(|c| c.median_wall_time_s.is_some() && c.failures == 0));
        assert_eq!(report.agreement.len(), 4);
        assert!(report.agreement.iter().all(|a| a.relative_difference < 1e-10), "{:?}", report.agreement);
    }

    #[test]
    fn naive_cap_is_a_recorded_failure() {
        let mut spec = BenchmarkSpec::new(vec![NAIVE_DEFAULT_CAP + 1], vec![2], 1, 1);
        spec.paths = vec![GradPath::Naive];
        let report = run_benchmark(&spec).unwrap();
        assert_eq!(report.cells[0].failures, 1);
        assert!(report.rows[0].error.is_some());
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(run_benchmark(&BenchmarkSpec::new(vec![10], vec![1], 1, 0)).is_err());
        assert!(run_benchmark(&BenchmarkSpec::new(vec![], vec![3], 1, 0)).is_err());
    }

    #[test]
    fn csv_has_fixed_header() {
        let report = run_benchmark(&BenchmarkSpec::new(vec![12], vec![3], 1, 0)).unwrap();
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &report.rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("path,n,q,repetition,wall_time_s,peak_nxn_live,max_allocation_bytes,error\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
