//! Reverse-mode gradient of leave-one-out criteria.
//!
//! The criterion factors as `θ ↦ K ↦ (μ, σ²) ↦ L`. [`adjoint_loo`] pulls the
//! seed `(∂L/∂μ, ∂L/∂σ²)` back through the middle map to an `n × n` matrix,
//! which [`contract_gradient`] then contracts with every `∂K/∂θ_j`. The whole
//! pass costs two `n × n` products plus `O(q n²)` and keeps a constant number
//! of `n × n` buffers alive. [`naive_gradient`] is the per-parameter
//! `O(q n³)` route, kept as a cross-check and benchmark baseline.

use nalgebra::{DMatrix, DVector};

use crate::error::{GpError, Result};
use crate::kernels::{build_covariance, contract_gradient, param_derivative, KernelParams};
use crate::linalg::{gemm, Op};
use crate::loo::{loo_moments, precompute, LooMoments, LooWorkspace};
use crate::scoring::{criterion, ScoreGradient, ScoringRule};

/// Largest `n` accepted by [`naive_gradient`].
pub const NAIVE_DEFAULT_CAP: usize = 1500;

/// Sensitivities `(δ_μ, δ_σ²)` of a scalar criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSeed {
    pub d_mu: Vec<f64>,
    pub d_sigma2: Vec<f64>,
}

impl From<&ScoreGradient> for AdjointSeed {
    fn from(g: &ScoreGradient) -> Self {
        AdjointSeed { d_mu: g.d_mu.clone(), d_sigma2: g.d_sigma2.clone() }
    }
}

/// `δ_K`, the pull-back of a seed onto the covariance matrix. Not symmetric in general.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAdjoint {
    pub delta_k: DMatrix<f64>,
}

/// Applies the transposed Jacobian of `K ↦ (μ, σ²)` to `seed`.
///
/// Only `ws.b`, `ws.alpha` and `ws.kappa_inv` are read, so any linear
/// predictor with the same leave-one-out structure can supply its own `B`.
pub fn adjoint_loo(ws: &LooWorkspace, z: &DVector<f64>, seed: &AdjointSeed) -> Result<CovarianceAdjoint> {
    let n = ws.len();
    for (len, context) in [(z.len(), "observations"), (seed.d_mu.len(), "seed d_mu"), (seed.d_sigma2.len(), "seed d_sigma2")] {
        if len != n {
            return Err(GpError::DimensionMismatch { context, expected: n, found: len });
        }
    }

    let mut d_alpha = DVector::zeros(n);
    let mut d_kappa = DVector::zeros(n);
    for i in 0..n {
        let kinv = ws.kappa_inv[i];
        let kinv2 = kinv * kinv;
        let d_chi = -seed.d_mu[i];
        d_alpha[i] = d_chi * kinv;
        d_kappa[i] = -d_chi * ws.alpha[i] * kinv2 - seed.d_sigma2[i] * kinv2;
    }

    // δ_B = δ_α Zᵀ + diag(δ_κ)
    let mut d_b = &d_alpha * z.transpose();
    for i in 0..n {
        d_b[(i, i)] += d_kappa[i];
    }

    // δ_K = −Bᵀ δ_B Bᵀ
    let mut tmp = DMatrix::zeros(n, n);
    gemm(1.0, &ws.b, Op::T, &d_b, Op::N, 0.0, &mut tmp);
    let mut delta_k = d_b;
    gemm(-1.0, &tmp, Op::N, &ws.b, Op::T, 0.0, &mut delta_k);
    Ok(CovarianceAdjoint { delta_k })
}

fn check_data(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<()> {
    if x.nrows() != z.len() {
        return Err(GpError::DimensionMismatch { context: "design rows vs observations", expected: x.nrows(), found: z.len() });
    }
    if x.nrows() < 2 {
        return Err(GpError::InvalidInput("leave-one-out criteria need at least two points".into()));
    }
    params.validate()
}

/// Forward leave-one-out pass: `K`, the workspace and the moments.
pub fn loo_forward(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<(LooWorkspace, LooMoments)> {
    check_data(params, x, z)?;
    let k = build_covariance(params, x)?;
    let ws = precompute(&k, z, params.noise_variance)?;
    let moments = loo_moments(&ws, z)?;
    Ok((ws, moments))
}

/// Criterion value only.
pub fn criterion_value(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>, rule: ScoringRule) -> Result<f64> {
    let (_, moments) = loo_forward(params, x, z)?;
    Ok(criterion(rule, &moments, z.as_slice())?.value)
}

/// `(L, ∇_θ L)` by the adjoint route.
pub fn criterion_with_gradient(
    params: &KernelParams,
    x: &DMatrix<f64>,
    z: &DVector<f64>,
    rule: ScoringRule,
) -> Result<(f64, Vec<f64>)> {
    criterion_with_gradient_by(params, x, z, |m, z| criterion(rule, m, z))
}

/// Adjoint route for an arbitrary criterion of the leave-one-out moments.
pub fn criterion_with_gradient_by<F>(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>, score: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&LooMoments, &[f64]) -> Result<ScoreGradient>,
{
    let (ws, moments) = loo_forward(params, x, z)?;
    let sg = score(&moments, z.as_slice())?;
    let adj = adjoint_loo(&ws, z, &AdjointSeed::from(&sg))?;
    drop(ws);
    let grad = contract_gradient(params, x, &adj.delta_k)?;
    Ok((sg.value, grad))
}

/// `(L, ∇_θ L)` by forming `∂B/∂θ_j = −B (∂K/∂θ_j) B` for each parameter.
pub fn naive_gradient(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>, rule: ScoringRule) -> Result<(f64, Vec<f64>)> {
    naive_gradient_by(params, x, z, NAIVE_DEFAULT_CAP, |m, z| criterion(rule, m, z))
}

pub fn naive_gradient_by<F>(
    params: &KernelParams,
    x: &DMatrix<f64>,
    z: &DVector<f64>,
    max_n: usize,
    score: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&LooMoments, &[f64]) -> Result<ScoreGradient>,
{
    let n = x.nrows();
    if n > max_n {
        return Err(GpError::InvalidInput(format!("naive gradient limited to n <= {max_n}, got {n}")));
    }
    let (ws, moments) = loo_forward(params, x, z)?;
    let sg = score(&moments, z.as_slice())?;
    let b = &ws.b;
    let mut tmp = DMatrix::zeros(n, n);
    let mut d_b = DMatrix::zeros(n, n);
    let mut grad = Vec::with_capacity(params.n_params());
    for j in 0..params.n_params() {
        let slice = param_derivative(params, x, j)?;
        gemm(1.0, &slice, Op::N, b, Op::N, 0.0, &mut tmp);
        gemm(-1.0, b, Op::N, &tmp, Op::N, 0.0, &mut d_b);
        let d_bz = &d_b * z;
        let mut g = 0.0;
        for i in 0..n {
            let kinv = ws.kappa_inv[i];
            let d_mu = -d_bz[i] * kinv + ws.alpha[i] * d_b[(i, i)] * kinv * kinv;
            let d_s2 = -d_b[(i, i)] * kinv * kinv;
            g += sg.d_mu[i] * d_mu + sg.d_sigma2[i] * d_s2;
        }
        grad.push(g);
    }
    Ok((sg.value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::oracles::finite_diff_gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(rng: &mut ChaCha8Rng, n: usize, d: usize, estimate_noise: bool) -> (KernelParams, DMatrix<f64>, DVector<f64>) {
        let family = if rng.random_bool(0.5) { KernelFamily::Matern52 } else { KernelFamily::SquaredExponential };
        let p = KernelParams::new(
            family,
            rng.random_range(0.5..2.0),
            (0..d).map(|_| rng.random_range(0.3..1.0)).collect(),
            rng.random_range(0.01..0.3),
        )
        .unwrap()
        .with_estimated_noise(estimate_noise);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(0.0..1.0));
        let z = DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
        (p, x, z)
    }

    #[test]
    fn zero_seed_gives_zero_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (p, x, z) = instance(&mut rng, 5, 2, false);
        let (ws, _) = loo_forward(&p, &x, &z).unwrap();
        let adj = adjoint_loo(&ws, &z, &AdjointSeed { d_mu: vec![0.0; 5], d_sigma2: vec![0.0; 5] }).unwrap();
        assert!(adj.delta_k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_point_passes_variance_seed_through() {
        let z = DVector::from_element(1, 3.0);
        let ws = precompute(&DMatrix::from_element(1, 1, 2.0), &z, 0.5).unwrap();
        let adj = adjoint_loo(&ws, &z, &AdjointSeed { d_mu: vec![0.7], d_sigma2: vec![1.3] }).unwrap();
        assert!((adj.delta_k[(0, 0)] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn seed_length_checked() {
        let z = DVector::from_element(2, 1.0);
        let ws = precompute(&DMatrix::identity(2, 2), &z, 0.0).unwrap();
        assert!(adjoint_loo(&ws, &z, &AdjointSeed { d_mu: vec![0.0], d_sigma2: vec![0.0; 2] }).is_err());
    }

    #[test]
    fn adjoint_matches_entrywise_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 8;
        let (p, x, z) = instance(&mut rng, n, 2, false);
        let k = build_covariance(&p, &x).unwrap();
        let seed = AdjointSeed {
            d_mu: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            d_sigma2: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let ws = precompute(&k, &z, p.noise_variance).unwrap();
        let adj = adjoint_loo(&ws, &z, &seed).unwrap();
        let h = 1e-6;
        // Symmetric perturbations (K_rc and K_cr together).
        for r in 0..n {
            for c in r..n {
                let moments_at = |delta: f64| {
                    let mut kp = k.clone();
                    kp[(r, c)] += delta;
                    if r != c {
                        kp[(c, r)] += delta;
                    }
                    loo_moments(&precompute(&kp, &z, p.noise_variance).unwrap(), &z).unwrap()
                };
                let (mp, mm) = (moments_at(h), moments_at(-h));
                let column: f64 = (0..n)
                    .map(|i| {
                        seed.d_mu[i] * (mp.mu[i] - mm.mu[i]) / (2.0 * h)
                            + seed.d_sigma2[i] * (mp.sigma2[i] - mm.sigma2[i]) / (2.0 * h)
                    })
                    .sum();
                let expected = if r == c { adj.delta_k[(r, r)] } else { adj.delta_k[(r, c)] + adj.delta_k[(c, r)] };
                assert!((column - expected).abs() < 1e-6, "({r},{c}) {column} vs {expected}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for rule in ScoringRule::ALL {
            for estimate_noise in [false, true] {
                let (p, x, z) = instance(&mut rng, 12, 2, estimate_noise);
                let (_, g) = criterion_with_gradient(&p, &x, &z, rule).unwrap();
                let fd = finite_diff_gradient(
                    |t: &[f64]| criterion_value(&p.with_values(t).unwrap(), &x, &z, rule).unwrap(),
                    &p.to_vec(),
                    1e-6,
                )
                .unwrap();
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{rule}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn adjoint_and_naive_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for rule in ScoringRule::ALL {
            let (p, x, z) = instance(&mut rng, 15, 3, true);
            let (va, ga) = criterion_with_gradient(&p, &x, &z, rule).unwrap();
            let (vn, gn) = naive_gradient(&p, &x, &z, rule).unwrap();
            assert_eq!(va, vn);
            for (a, b) in ga.iter().zip(&gn) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{rule}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn variance_only_paths_equal_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (p, x, z) = instance(&mut rng, 10, 1, false);
        // Differentiate along the process variance only.
        let (_, ga) = criterion_with_gradient(&p, &x, &z, ScoringRule::Crps).unwrap();
        let (_, gn) = naive_gradient(&p, &x, &z, ScoringRule::Crps).unwrap();
        let fd = finite_diff_gradient(
            |t: &[f64]| {
                let mut th = p.to_vec();
                th[0] = t[0];
                criterion_value(&p.with_values(&th).unwrap(), &x, &z, ScoringRule::Crps).unwrap()
            },
            &[p.process_variance],
            1e-6,
        )
        .unwrap();
        assert!((ga[0] - fd[0]).abs() < 1e-7 && (gn[0] - fd[0]).abs() < 1e-7);
    }

    #[test]
    fn constant_criterion_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (p, x, z) = instance(&mut rng, 6, 2, true);
        let constant = |m: &LooMoments, _: &[f64]| {
            Ok(ScoreGradient { value: 1.0, d_mu: vec![0.0; m.mu.len()], d_sigma2: vec![0.0; m.mu.len()] })
        };
        let (_, ga) = criterion_with_gradient_by(&p, &x, &z, constant).unwrap();
        let (_, gn) = naive_gradient_by(&p, &x, &z, 100, constant).unwrap();
        assert!(ga.iter().chain(&gn).all(|&g| g == 0.0));
    }

    #[test]
    fn press_gradient_ignores_variance_seed() {
        // When every LOO residual vanishes the PRESS seed is zero, hence the whole gradient.
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.5, 1.0]);
        let z = DVector::zeros(3);
        let p = KernelParams::new(KernelFamily::SquaredExponential, 1.0, vec![0.4], 0.1).unwrap();
        let (v, g) = criterion_with_gradient(&p, &x, &z, ScoringRule::Press).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn naive_cap_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let (p, x, z) = instance(&mut rng, 6, 1, false);
        assert!(naive_gradient_by(&p, &x, &z, 5, |m, z| criterion(ScoringRule::Crps, m, z)).is_err());
    }
}
