//! Closed-form leave-one-out predictive moments.
//!
//! With `B = (K + σ_ε² I)⁻¹` the leave-one-out law of `Z_i` given the other
//! observations is `N(Z_i − (BZ)_i / B_ii, 1 / B_ii)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::linalg::{gemm, lower_triangular_inverse, Op};

/// Design points (one per row) and their observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub z: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, z: DVector<f64>) -> Result<Self> {
        if x.nrows() != z.len() {
            return Err(GpError::DimensionMismatch {
                context: "design rows vs observations",
                expected: x.nrows(),
                found: z.len(),
            });
        }
        if x.ncols() == 0 {
            return Err(GpError::InvalidInput("design has no columns".into()));
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(GpError::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Dataset { x, z })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Quantities shared by the forward leave-one-out pass and its adjoint.
#[derive(Debug, Clone)]
pub struct LooWorkspace {
    /// `B = (K + σ_ε² I)⁻¹`
    pub b: DMatrix<f64>,
    /// `α = B Z`
    pub alpha: DVector<f64>,
    /// `κ = diag(B)`
    pub kappa: DVector<f64>,
    pub kappa_inv: DVector<f64>,
    /// `χ = α ∘ κ⁻¹`
    pub chi: DVector<f64>,
    /// Lower Cholesky factor of `K + σ_ε² I`.
    pub chol: DMatrix<f64>,
    pub noise_variance: f64,
}

impl LooWorkspace {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `log det(K + σ_ε² I)` from the Cholesky factor.
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooMoments {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// In-place lower Cholesky factorization; the strict upper triangle is zeroed.
pub(crate) fn cholesky_lower(mut a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    for j in 0..n {
        let pivot = a[(j, j)];
        if !(pivot > 0.0 && pivot.is_finite()) {
            return Err(GpError::SingularCovariance { pivot: j });
        }
        let ljj = pivot.sqrt();
        a[(j, j)] = ljj;
        {
            let mut col = a.view_mut((j + 1, j), (n - j - 1, 1));
            col /= ljj;
        }
        // Right-looking update of the trailing lower triangle, one column at a time.
        for c in (j + 1)..n {
            let lcj = a[(c, j)];
            if lcj == 0.0 {
                continue;
            }
            let (head, tail) = a.as_mut_slice().split_at_mut(c * n);
            let src = &head[j * n + c..(j + 1) * n];
            let dst = &mut tail[c..n];
            dst.iter_mut().zip(src).for_each(|(d, s)| *d -= lcj * s);
        }
    }
    a.fill_upper_triangle(0.0, 1);
    Ok(a)
}

/// Factors `K + σ_ε² I`, forms `B` explicitly and caches the leave-one-out intermediates.
pub fn precompute(k: &DMatrix<f64>, z: &DVector<f64>, noise_variance: f64) -> Result<LooWorkspace> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(GpError::DimensionMismatch { context: "covariance not square", expected: n, found: k.ncols() });
    }
    if z.len() != n {
        return Err(GpError::DimensionMismatch { context: "observations vs covariance", expected: n, found: z.len() });
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(GpError::InvalidInput(format!("noise variance must be non-negative, got {noise_variance}")));
    }
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += noise_variance;
    }
    let chol = cholesky_lower(a)?;

    // B = L⁻ᵀ L⁻¹
    let linv = lower_triangular_inverse(&chol);
    let mut b = DMatrix::zeros(n, n);
    gemm(1.0, &linv, Op::T, &linv, Op::N, 0.0, &mut b);
    drop(linv);
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = s;
            b[(j, i)] = s;
        }
    }

    let alpha = &b * z;
    let kappa = b.diagonal();
    if let Some(i) = kappa.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(GpError::SingularCovariance { pivot: i });
    }
    let kappa_inv = kappa.map(|v| 1.0 / v);
    let chi = alpha.component_mul(&kappa_inv);
    Ok(LooWorkspace { b, alpha, kappa, kappa_inv, chi, chol, noise_variance })
}

/// `μ_i = Z_i − χ_i`, `σ_i² = 1 / κ_i`.
pub fn loo_moments(ws: &LooWorkspace, z: &DVector<f64>) -> Result<LooMoments> {
    if z.len() != ws.len() {
        return Err(GpError::DimensionMismatch { context: "observations vs workspace", expected: ws.len(), found: z.len() });
    }
    let mu = z.iter().zip(ws.chi.iter()).map(|(zi, ci)| zi - ci).collect();
    let sigma2 = ws.kappa_inv.iter().copied().collect();
    Ok(LooMoments { mu, sigma2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_covariance, KernelFamily, KernelParams};
    use crate::oracles::{brute_force_loo, solve_dense};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn scalar_workspace() {
        let ws = precompute(&DMatrix::from_element(1, 1, 2.0), &DVector::from_element(1, 3.0), 0.5).unwrap();
        assert!((ws.b[(0, 0)] - 0.4).abs() < 1e-15);
        assert!((ws.alpha[0] - 1.2).abs() < 1e-15);
        assert!((ws.kappa[0] - 0.4).abs() < 1e-15);
        assert!((ws.chi[0] - 3.0).abs() < 1e-15);
        let m = loo_moments(&ws, &DVector::from_element(1, 3.0)).unwrap();
        assert!(m.mu[0].abs() < 1e-15);
        assert!((m.sigma2[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn identity_covariance() {
        let z = DVector::from_vec(vec![1.0, -2.0, 5.0]);
        let ws = precompute(&DMatrix::identity(3, 3), &z, 0.0).unwrap();
        assert_eq!(ws.b, DMatrix::identity(3, 3));
        assert_eq!(ws.alpha, z);
        assert!(ws.kappa.iter().all(|&v| v == 1.0));
        assert_eq!(ws.chi, z);
        let m = loo_moments(&ws, &z).unwrap();
        assert_eq!(m.mu, vec![0.0; 3]);
        assert_eq!(m.sigma2, vec![1.0; 3]);
    }

    #[test]
    fn inverse_matches_independent_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_spd(&mut rng, 6);
        let z = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let ws = precompute(&k, &z, 0.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| k.row(i).iter().copied().collect()).collect();
        for c in 0..6 {
            let mut e = vec![0.0; 6];
            e[c] = 1.0;
            let col = solve_dense(&rows, &e).unwrap();
            for r in 0..6 {
                assert!((ws.b[(r, c)] - col[r]).abs() < 1e-10);
            }
        }
        let prod = &ws.b * &k;
        assert!((prod - DMatrix::identity(6, 6)).amax() < 1e-10);
        for i in 0..6 {
            assert_eq!(ws.chi[i], ws.alpha[i] * ws.kappa_inv[i]);
        }
    }

    #[test]
    fn singular_covariance_names_pivot() {
        let x = DMatrix::from_row_slice(3, 1, &[0.5, 0.5, 0.0]);
        let p = KernelParams::new(KernelFamily::SquaredExponential, 1.0, vec![0.3], 0.0).unwrap();
        let k = build_covariance(&p, &x).unwrap();
        let err = precompute(&k, &DVector::zeros(3), 0.0).unwrap_err();
        assert_eq!(err, GpError::SingularCovariance { pivot: 1 });
        assert!(precompute(&k, &DVector::zeros(3), 1e-3).is_ok());
    }

    #[test]
    fn matches_brute_force_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = KernelParams::new(KernelFamily::Matern52, 1.3, vec![0.4, 0.7], 0.05).unwrap();
        let x = DMatrix::from_fn(10, 2, |_, _| rng.random_range(0.0..1.0));
        let z = DVector::from_fn(10, |_, _| rng.random_range(-2.0..2.0));
        let k = build_covariance(&p, &x).unwrap();
        let m = loo_moments(&precompute(&k, &z, p.noise_variance).unwrap(), &z).unwrap();
        let oracle = brute_force_loo(&p, &x, &z).unwrap();
        for i in 0..10 {
            assert!((m.mu[i] - oracle.mu[i]).abs() < 1e-10);
            assert!((m.sigma2[i] - oracle.sigma2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(DMatrix::zeros(3, 1), DVector::zeros(2)).is_err());
        assert!(Dataset::new(DMatrix::from_element(1, 1, f64::INFINITY), DVector::zeros(1)).is_err());
        assert_eq!(Dataset::new(DMatrix::zeros(4, 2), DVector::zeros(4)).unwrap().len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn permutation_equivariant_and_above_noise_floor(
                seed in any::<u64>(), n in 2usize..15, noise_idx in 0usize..3
            ) {
                let noise = [0.0, 0.1, 1.0][noise_idx];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = KernelParams::new(KernelFamily::Matern52, 1.0, vec![0.3, 0.5], noise).unwrap();
                let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(0.0..1.0));
                let z = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let m = loo_moments(&precompute(&build_covariance(&p, &x).unwrap(), &z, noise).unwrap(), &z).unwrap();
                prop_assert!(m.sigma2.iter().all(|&s| s >= noise * (1.0 - 1e-12)));

                let mut perm: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    perm.swap(i, rng.random_range(0..=i));
                }
                let xp = DMatrix::from_fn(n, 2, |i, j| x[(perm[i], j)]);
                let zp = DVector::from_fn(n, |i, _| z[perm[i]]);
                let mp = loo_moments(&precompute(&build_covariance(&p, &xp).unwrap(), &zp, noise).unwrap(), &zp).unwrap();
                for i in 0..n {
                    prop_assert!((mp.mu[i] - m.mu[perm[i]]).abs() < 1e-8 * (1.0 + m.mu[perm[i]].abs()));
                    prop_assert!((mp.sigma2[i] - m.sigma2[perm[i]]).abs() < 1e-8 * m.sigma2[perm[i]]);
                }
            }
        }
    }
}
