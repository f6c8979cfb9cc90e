//! Anisotropic stationary covariance functions.
//!
//! Parameters are ordered as `θ = (process_variance, ρ_1, …, ρ_d [, noise_variance])`,
//! the trailing noise entry being present only when the noise variance is
//! estimated. Both families use the scaled distance `r² = Σ_m (x_m − y_m)² / ρ_m²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `σ² exp(−r²/2)`
    SquaredExponential,
    /// `σ² (1 + √5 r + 5r²/3) exp(−√5 r)`
    Matern52,
}

impl KernelFamily {
    /// Correlation at scaled distance `r` (unit process variance).
    #[inline]
    fn correlation(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                let r = r2.sqrt();
                (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-SQRT5 * r).exp()
            }
        }
    }

    /// `w(r)` such that `∂k/∂ρ_m = σ² w(r) (x_m − y_m)² / ρ_m³`.
    #[inline]
    fn length_scale_weight(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                let r = r2.sqrt();
                5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp()
            }
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "squared-exponential" | "rbf" | "gaussian" => Ok(KernelFamily::SquaredExponential),
            "matern52" | "matern-5/2" | "matern" => Ok(KernelFamily::Matern52),
            other => Err(GpError::InvalidInput(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Covariance parameters of a stationary anisotropic kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub family: KernelFamily,
    pub process_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
    /// Whether `noise_variance` is a free parameter (adds one entry to θ).
    #[serde(default)]
    pub estimate_noise: bool,
}

impl KernelParams {
    pub fn new(
        family: KernelFamily,
        process_variance: f64,
        length_scales: Vec<f64>,
        noise_variance: f64,
    ) -> Result<Self> {
        let params = KernelParams {
            family,
            process_variance,
            length_scales,
            noise_variance,
            estimate_noise: false,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_estimated_noise(mut self, estimate: bool) -> Self {
        self.estimate_noise = estimate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.process_variance > 0.0 && self.process_variance.is_finite()) {
            return Err(GpError::InvalidInput(format!(
                "process variance must be positive and finite, got {}",
                self.process_variance
            )));
        }
        if self.length_scales.is_empty() {
            return Err(GpError::InvalidInput("at least one length scale is required".into()));
        }
        if let Some(rho) = self.length_scales.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(GpError::InvalidInput(format!(
                "length scales must be positive and finite, got {rho}"
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(GpError::InvalidInput(format!(
                "noise variance must be non-negative and finite, got {}",
                self.noise_variance
            )));
        }
        if self.estimate_noise && self.noise_variance == 0.0 {
            return Err(GpError::InvalidInput(
                "an estimated noise variance must start strictly positive".into(),
            ));
        }
        Ok(())
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// Number of free parameters `q`.
    pub fn n_params(&self) -> usize {
        self.dim() + 1 + usize::from(self.estimate_noise)
    }

    pub fn noise_index(&self) -> Option<usize> {
        self.estimate_noise.then(|| self.dim() + 1)
    }

    /// The parameter vector θ in canonical order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_params());
        theta.push(self.process_variance);
        theta.extend_from_slice(&self.length_scales);
        if self.estimate_noise {
            theta.push(self.noise_variance);
        }
        theta
    }

    /// Copy of `self` with θ replaced by `theta`; fixed fields are kept.
    pub fn with_values(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.n_params() {
            return Err(GpError::DimensionMismatch {
                context: "parameter vector",
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        let d = self.dim();
        let params = KernelParams {
            family: self.family,
            process_variance: theta[0],
            length_scales: theta[1..=d].to_vec(),
            noise_variance: if self.estimate_noise { theta[d + 1] } else { self.noise_variance },
            estimate_noise: self.estimate_noise,
        };
        params.validate()?;
        Ok(params)
    }

    #[inline]
    fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.length_scales)
            .map(|((a, b), rho)| {
                let t = (a - b) / rho;
                t * t
            })
            .sum()
    }
}

/// Evaluates `k_θ(x, y)`.
pub fn kernel_eval(params: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    params.validate()?;
    let d = params.dim();
    for (v, ctx) in [(x, "x"), (y, "y")] {
        if v.len() != d {
            return Err(GpError::DimensionMismatch { context: ctx, expected: d, found: v.len() });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GpError::InvalidInput(format!("non-finite coordinate in {ctx}")));
        }
    }
    let r2 = params.scaled_sq_dist(x, y);
    Ok(params.process_variance * params.family.correlation(r2))
}

/// Design points stored one per column so that each point is contiguous.
fn points_by_column(params: &KernelParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    params.validate()?;
    if x.ncols() != params.dim() {
        return Err(GpError::DimensionMismatch {
            context: "design columns vs length scales",
            expected: params.dim(),
            found: x.ncols(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GpError::InvalidInput("non-finite design coordinate".into()));
    }
    Ok(x.transpose())
}

/// Builds `K = (k_θ(x_i, x_j))_{i,j}` for the rows of `x` (noise not included).
pub fn build_covariance(params: &KernelParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pts = points_by_column(params, x)?;
    let n = pts.ncols();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.process_variance;
        let xi = pts.column(i);
        for l in 0..i {
            let r2 = params.scaled_sq_dist(xi.as_slice(), pts.column(l).as_slice());
            let v = params.process_variance * params.family.correlation(r2);
            k[(i, l)] = v;
            k[(l, i)] = v;
        }
    }
    Ok(k)
}

/// Returns the slice `∂K/∂θ_j` (for the noise parameter, `∂(K + σ_ε² I)/∂σ_ε² = I`).
pub fn param_derivative(params: &KernelParams, x: &DMatrix<f64>, j: usize) -> Result<DMatrix<f64>> {
    let q = params.n_params();
    if j >= q {
        return Err(GpError::ParameterIndex { index: j, q });
    }
    let pts = points_by_column(params, x)?;
    let n = pts.ncols();
    let d = params.dim();
    if j == d + 1 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut slice = DMatrix::zeros(n, n);
    for i in 0..n {
        if j == 0 {
            slice[(i, i)] = 1.0;
        }
        let xi = pts.column(i);
        for l in 0..i {
            let xl = pts.column(l);
            let r2 = params.scaled_sq_dist(xi.as_slice(), xl.as_slice());
            let v = if j == 0 {
                params.family.correlation(r2)
            } else {
                let m = j - 1;
                let rho = params.length_scales[m];
                let delta = xi[m] - xl[m];
                params.process_variance * params.family.length_scale_weight(r2) * delta * delta
                    / (rho * rho * rho)
            };
            slice[(i, l)] = v;
            slice[(l, i)] = v;
        }
    }
    Ok(slice)
}

/// Frobenius contractions `⟨Δ, ∂K/∂θ_j⟩` for every parameter `j`.
///
/// All components are accumulated in one pass over the point pairs, so no
/// derivative slice is ever stored. `delta_k` need not be symmetric.
pub fn contract_gradient(
    params: &KernelParams,
    x: &DMatrix<f64>,
    delta_k: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let pts = points_by_column(params, x)?;
    let n = pts.ncols();
    if delta_k.nrows() != n || delta_k.ncols() != n {
        return Err(GpError::DimensionMismatch {
            context: "adjoint matrix vs design size",
            expected: n,
            found: if delta_k.nrows() != n { delta_k.nrows() } else { delta_k.ncols() },
        });
    }
    let d = params.dim();
    let sigma2 = params.process_variance;
    let trace: f64 = delta_k.diagonal().sum();

    let mut grad = vec![0.0; params.n_params()];
    let mut by_length_scale = vec![0.0; d];
    let mut var_acc = trace;
    for i in 0..n {
        let xi = pts.column(i);
        for l in 0..i {
            let xl = pts.column(l);
            let r2 = params.scaled_sq_dist(xi.as_slice(), xl.as_slice());
            let s = delta_k[(i, l)] + delta_k[(l, i)];
            var_acc += s * params.family.correlation(r2);
            let sw = s * params.family.length_scale_weight(r2);
            for (m, acc) in by_length_scale.iter_mut().enumerate() {
                let delta = xi[m] - xl[m];
                *acc += sw * delta * delta;
            }
        }
    }
    grad[0] = var_acc;
    for (m, acc) in by_length_scale.into_iter().enumerate() {
        let rho = params.length_scales[m];
        grad[m + 1] = sigma2 * acc / (rho * rho * rho);
    }
    if let Some(idx) = params.noise_index() {
        grad[idx] = trace;
    }
    Ok(grad)
}
