//! Slow, independent reference computations.
//!
//! Nothing here touches the factorization, inverse or contraction code of
//! the production modules: systems are solved by Gaussian elimination on
//! plain `Vec<Vec<f64>>` rows and leave-one-out moments by explicit refits.

use nalgebra::{DMatrix, DVector};

use crate::error::{GpError, Result};
use crate::kernels::{kernel_eval, KernelParams};
use crate::loo::LooMoments;

/// LU factorization with partial pivoting, returning the packed factors,
/// the row permutation and the permutation sign.
fn lu_decompose(a: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<usize>, f64)> {
    let n = a.len();
    let mut lu: Vec<Vec<f64>> = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        if lu[k].len() != n {
            return Err(GpError::DimensionMismatch { context: "square system", expected: n, found: lu[k].len() });
        }
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[i][k].abs()))
            .fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if pmax == 0.0 || !pmax.is_finite() {
            return Err(GpError::SingularCovariance { pivot: k });
        }
        if p != k {
            lu.swap(p, k);
            perm.swap(p, k);
            sign = -sign;
        }
        for i in (k + 1)..n {
            let f = lu[i][k] / lu[k][k];
            lu[i][k] = f;
            for j in (k + 1)..n {
                lu[i][j] -= f * lu[k][j];
            }
        }
    }
    Ok((lu, perm, sign))
}

fn lu_solve(lu: &[Vec<f64>], perm: &[usize], b: &[f64]) -> Vec<f64> {
    let n = lu.len();
    let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            y[i] -= lu[i][j] * y[j];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            y[i] -= lu[i][j] * y[j];
        }
        y[i] /= lu[i][i];
    }
    y
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.len() {
        return Err(GpError::DimensionMismatch { context: "right-hand side", expected: a.len(), found: b.len() });
    }
    let (lu, perm, _) = lu_decompose(a)?;
    Ok(lu_solve(&lu, &perm, b))
}

/// `log |det A|` and the sign of `det A`.
pub fn log_det_dense(a: &[Vec<f64>]) -> Result<(f64, f64)> {
    let (lu, _, mut sign) = lu_decompose(a)?;
    let mut acc = 0.0;
    for (i, row) in lu.iter().enumerate() {
        acc += row[i].abs().ln();
        if row[i] < 0.0 {
            sign = -sign;
        }
    }
    Ok((acc, sign))
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

fn noisy_covariance_rows(params: &KernelParams, pts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    pts.iter()
        .enumerate()
        .map(|(i, a)| {
            pts.iter()
                .enumerate()
                .map(|(j, b)| Ok(kernel_eval(params, a, b)? + if i == j { params.noise_variance } else { 0.0 }))
                .collect()
        })
        .collect()
}

/// Leave-one-out moments by `n` explicit `(n−1)`-point regressions.
pub fn brute_force_loo(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<LooMoments> {
    let n = x.nrows();
    if n < 2 {
        return Err(GpError::InvalidInput("leave-one-out needs at least two points".into()));
    }
    if z.len() != n {
        return Err(GpError::DimensionMismatch { context: "observations", expected: n, found: z.len() });
    }
    let pts: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let mut mu = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    for i in 0..n {
        let others: Vec<Vec<f64>> = (0..n).filter(|&j| j != i).map(|j| pts[j].clone()).collect();
        let z_others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| z[j]).collect();
        let a = noisy_covariance_rows(params, &others)?;
        let k_i: Vec<f64> = others.iter().map(|p| kernel_eval(params, &pts[i], p)).collect::<Result<_>>()?;
        let w = solve_dense(&a, &k_i)?;
        mu.push(w.iter().zip(&z_others).map(|(a, b)| a * b).sum());
        let prior = kernel_eval(params, &pts[i], &pts[i])? + params.noise_variance;
        sigma2.push(prior - w.iter().zip(&k_i).map(|(a, b)| a * b).sum::<f64>());
    }
    Ok(LooMoments { mu, sigma2 })
}

/// Gaussian log marginal likelihood through LU determinant and solve.
pub fn direct_log_likelihood(params: &KernelParams, x: &DMatrix<f64>, z: &DVector<f64>) -> Result<f64> {
    let n = x.nrows();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let a = noisy_covariance_rows(params, &pts)?;
    let zv: Vec<f64> = z.iter().copied().collect();
    let sol = solve_dense(&a, &zv)?;
    let (logdet, sign) = log_det_dense(&a)?;
    if sign <= 0.0 {
        return Err(GpError::SingularCovariance { pivot: 0 });
    }
    let quad: f64 = sol.iter().zip(&zv).map(|(a, b)| a * b).sum();
    Ok(-0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Central differences with per-coordinate step `step · max(1, |x_j|)`.
pub fn finite_diff_gradient<F>(f: F, x0: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut grad = Vec::with_capacity(x0.len());
    for j in 0..x0.len() {
        let h = step * x0[j].abs().max(1.0);
        x[j] = x0[j] + h;
        let fp = f(&x);
        x[j] = x0[j] - h;
        let fm = f(&x);
        x[j] = x0[j];
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(GpError::InvalidInput(format!("non-finite function value at coordinate {j}")));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = K15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        kronrod += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let (est, err) = gauss_kronrod(f, a, b);
    if err <= tol || (b - a).abs() < 1e-14 {
        return Ok(est);
    }
    if depth == 0 {
        return Err(GpError::Quadrature(format!("interval [{a}, {b}] error {err:e} above {tol:e}")));
    }
    let m = 0.5 * (a + b);
    Ok(adaptive(f, a, m, 0.5 * tol, depth - 1)? + adaptive(f, m, b, 0.5 * tol, depth - 1)?)
}

/// Negated CRPS by adaptive quadrature of `−∫ (F(u) − 1{z ≤ u})² du`.
///
/// The integration range is `μ ± 12σ`, widened to contain `z`, and split at
/// the jump of the indicator.
pub fn crps_numeric(mu: f64, sigma2: f64, z: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(GpError::Domain(sigma2));
    }
    let sigma = sigma2.sqrt();
    let cdf = |u: f64| 0.5 * statrs::function::erf::erfc(-(u - mu) / (sigma * std::f64::consts::SQRT_2));
    let lo = (mu - 12.0 * sigma).min(z);
    let hi = (mu + 12.0 * sigma).max(z);
    let below = |u: f64| cdf(u).powi(2);
    let above = |u: f64| (1.0 - cdf(u)).powi(2);
    let tol = 1e-10;
    let left = if z > lo { adaptive(&below, lo, z, 0.5 * tol, 60)? } else { 0.0 };
    let right = if hi > z { adaptive(&above, z, hi, 0.5 * tol, 60)? } else { 0.0 };
    Ok(-(left + right))
}
