//! Multi-start quasi-Newton estimation of covariance parameters.
//!
//! Every criterion is maximized in log coordinates `η = log θ`, so the
//! optimizer minimizes `−L(exp η)` with gradient `−θ ∘ ∇_θ L`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::criterion_with_gradient;
use crate::error::{GpError, Result};
use crate::kernels::{KernelFamily, KernelParams};
use crate::likelihood::lml_gradient;
use crate::loo::Dataset;
use crate::optimize::{minimize, LbfgsOptions};
use crate::rng::{stream_rng, Stream};
use crate::scoring::ScoringRule;

/// Objective maximized by [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Press,
    LogDensity,
    Crps,
    Mle,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Press => "press",
            Criterion::LogDensity => "log-density",
            Criterion::Crps => "crps",
            Criterion::Mle => "mle",
        }
    }

    pub fn scoring_rule(self) -> Option<ScoringRule> {
        match self {
            Criterion::Press => Some(ScoringRule::Press),
            Criterion::LogDensity => Some(ScoringRule::LogDensity),
            Criterion::Crps => Some(ScoringRule::Crps),
            Criterion::Mle => None,
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Criterion {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("mle") || s.eq_ignore_ascii_case("ml") {
            return Ok(Criterion::Mle);
        }
        Ok(match s.parse::<ScoringRule>()? {
            ScoringRule::Press => Criterion::Press,
            ScoringRule::LogDensity => Criterion::LogDensity,
            ScoringRule::Crps => Criterion::Crps,
        })
    }
}

/// `(value, ∇_θ value)` of a criterion, oriented so that larger is better.
pub fn evaluate_criterion(criterion: Criterion, params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    match criterion.scoring_rule() {
        Some(rule) => criterion_with_gradient(params, x, z, rule),
        None => lml_gradient(params, x, z),
    }
}

pub const DEFAULT_LOG_BOUND: f64 = 6.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub criterion: Criterion,
    pub family: KernelFamily,
    pub n_starts: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Per-parameter `(lower, upper)` bounds on `log θ`; `None` uses `±6.9` for every parameter.
    pub parameter_bounds: Option<Vec<(f64, f64)>>,
    pub estimate_noise: bool,
    /// Noise variance when it is held fixed.
    pub noise_variance: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            criterion: Criterion::Crps,
            family: KernelFamily::SquaredExponential,
            n_starts: 5,
            max_iterations: 200,
            gradient_tolerance: 1e-5,
            parameter_bounds: None,
            estimate_noise: false,
            noise_variance: 0.0,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    fn bounds(&self, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let pairs = match &self.parameter_bounds {
            Some(b) if b.len() != q => {
                return Err(GpError::DimensionMismatch { context: "parameter bounds", expected: q, found: b.len() })
            }
            Some(b) => b.clone(),
            None => vec![(-DEFAULT_LOG_BOUND, DEFAULT_LOG_BOUND); q],
        };
        if let Some((lo, hi)) = pairs.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(GpError::InvalidInput(format!("invalid log-bounds ({lo}, {hi})")));
        }
        Ok(pairs.into_iter().unzip())
    }

    fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_iterations == 0 {
            return Err(GpError::InvalidInput("n_starts and max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(GpError::InvalidInput("gradient tolerance must be positive".into()));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(GpError::InvalidInput("noise variance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    /// Initial θ.
    pub start: Vec<f64>,
    /// Criterion at the initial θ, when it could be evaluated.
    pub start_value: Option<f64>,
    pub final_value: Option<f64>,
    pub final_params: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: KernelParams,
    pub criterion: Criterion,
    pub criterion_value: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub start_index: usize,
    pub all_starts: Vec<StartRecord>,
}

/// Maximizes the configured criterion over θ from `n_starts` random initial points.
pub fn estimate(data: &Dataset, config: &EstimatorConfig) -> Result<FitResult> {
    config.validate()?;
    if data.len() < 3 {
        return Err(GpError::InvalidInput(format!("estimation needs at least 3 points, got {}", data.len())));
    }
    let d = data.dim();
    let template = KernelParams {
        family: config.family,
        process_variance: 1.0,
        length_scales: vec![1.0; d],
        noise_variance: if config.estimate_noise { 1.0 } else { config.noise_variance },
        estimate_noise: config.estimate_noise,
    };
    let q = template.n_params();
    let (lower, upper) = config.bounds(q)?;
    let opts = LbfgsOptions { max_iterations: config.max_iterations, gtol: config.gradient_tolerance, ..Default::default() };

    let mut rng: ChaCha8Rng = stream_rng(config.seed, Stream::Starts, 0);
    let starts: Vec<Vec<f64>> = (0..config.n_starts)
        .map(|_| (0..q).map(|j| rng.random_range(lower[j]..upper[j])).collect())
        .collect();

    let objective = |eta: &[f64]| -> Option<(f64, Vec<f64>)> {
        let theta: Vec<f64> = eta.iter().map(|v| v.exp()).collect();
        let params = template.with_values(&theta).ok()?;
        let (value, grad) = evaluate_criterion(config.criterion, &params, &data.x, &data.z).ok()?;
        Some((-value, grad.iter().zip(&theta).map(|(g, t)| -g * t).collect()))
    };

    let mut records = Vec::with_capacity(starts.len());
    for eta0 in &starts {
        let start: Vec<f64> = eta0.iter().map(|v| v.exp()).collect();
        let start_value = objective(eta0).map(|(f, _)| -f);
        let record = match minimize(objective, eta0, &lower, &upper, &opts) {
            Some(out) => StartRecord {
                start,
                start_value,
                final_value: Some(-out.f),
                final_params: Some(out.x.iter().map(|v| v.exp()).collect()),
                iterations: out.iterations,
                converged: out.converged(),
                error: None,
            },
            None => StartRecord {
                start,
                start_value,
                final_value: None,
                final_params: None,
                iterations: 0,
                converged: false,
                error: Some("criterion could not be evaluated at the start point".into()),
            },
        };
        records.push(record);
    }

    let pick = |require_converged: bool| {
        records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.final_value.is_some() && (r.converged || !require_converged))
            .fold(None::<(usize, f64)>, |best, (i, r)| {
                let v = r.final_value.unwrap_or(f64::NEG_INFINITY);
                match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((i, v)),
                }
            })
    };
    let Some((best, value)) = pick(true).or_else(|| pick(false)) else {
        let diagnostics: Vec<String> = records
            .iter()
            .enumerate()
            .map(|(i, r)| format!("start {i}: {}", r.error.as_deref().unwrap_or("no result")))
            .collect();
        return Err(GpError::EstimationFailed(diagnostics.join("; ")));
    };
    let rec = &records[best];
    let params = template.with_values(rec.final_params.as_deref().unwrap_or_default())?;
    Ok(FitResult {
        params,
        criterion: config.criterion,
        criterion_value: value,
        n_iterations: rec.iterations,
        converged: rec.converged,
        start_index: best,
        all_starts: records,
    })
}
