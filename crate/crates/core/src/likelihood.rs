//! Zero-mean Gaussian log marginal likelihood and its gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::{GpError, Result};
use crate::kernels::{build_covariance, contract_gradient, KernelParams};
use crate::loo::{cholesky_lower, precompute};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<()> {
    if x.nrows() != z.len() {
        return Err(GpError::DimensionMismatch { context: "design rows vs observations", expected: x.nrows(), found: z.len() });
    }
    if z.is_empty() {
        return Err(GpError::InvalidInput("empty dataset".into()));
    }
    params.validate()
}

/// `ℓ(θ) = −½ Zᵀ(K + σ_ε² I)⁻¹Z − ½ log det(K + σ_ε² I) − (n/2) log 2π`.
pub fn log_marginal_likelihood(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<f64> {
    check(params, x, z)?;
    let mut a = build_covariance(params, x)?;
    for i in 0..a.nrows() {
        a[(i, i)] += params.noise_variance;
    }
    let l = cholesky_lower(a)?;
    let y = l
        .solve_lower_triangular(z)
        .ok_or(GpError::SingularCovariance { pivot: 0 })?;
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * y.norm_squared() - 0.5 * log_det - 0.5 * z.len() as f64 * LN_2PI)
}

/// `(ℓ, ∇_θ ℓ)` with `∂ℓ/∂θ_j = ½ ⟨ααᵀ − B, ∂K/∂θ_j⟩`.
pub fn lml_gradient(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    check(params, x, z)?;
    let k = build_covariance(params, x)?;
    let ws = precompute(&k, z, params.noise_variance)?;
    drop(k);
    let n = z.len();
    let value = -0.5 * z.dot(&ws.alpha) - 0.5 * ws.log_det() - 0.5 * n as f64 * LN_2PI;
    let mut delta_k = ws.b;
    for c in 0..n {
        let ac = ws.alpha[c];
        for r in 0..n {
            delta_k[(r, c)] = 0.5 * (ws.alpha[r] * ac - delta_k[(r, c)]);
        }
    }
    let grad = contract_gradient(params, x, &delta_k)?;
    Ok((value, grad))
}
