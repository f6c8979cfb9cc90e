//! Draws of a zero-mean Gaussian process observed with additive noise.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::kernels::{build_covariance, KernelParams};
use crate::loo::cholesky_lower;
use crate::rng::{stream_rng, Stream};

/// Relative diagonal jitter used when factorizing `K` for sampling.
pub const SAMPLING_JITTER: f64 = 1e-10;

/// `Z = chol(K + jitter I) u + σ_ε v` with independent standard-normal `u`, `v`.
pub fn sample_gp(params: &KernelParams, x: &DMatrix<f64>, seed: u64) -> Result<DVector<f64>> {
    let mut k = build_covariance(params, x)?;
    let n = k.nrows();
    let jitter = SAMPLING_JITTER * params.process_variance;
    for i in 0..n {
        k[(i, i)] += jitter;
    }
    let l = cholesky_lower(k)?;
    let mut rng = stream_rng(seed, Stream::Sample, 0);
    let u = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    Ok(&l * u + v * params.noise_variance.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    #[test]
    fn empirical_covariance_matches_model() {
        let p = KernelParams::new(KernelFamily::SquaredExponential, 1.5, vec![0.4], 0.2).unwrap();
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.3, 0.9]);
        let mut target = build_covariance(&p, &x).unwrap();
        for i in 0..3 {
            target[(i, i)] += p.noise_variance;
        }
        let reps = 10_000;
        let mut acc = DMatrix::<f64>::zeros(3, 3);
        for r in 0..reps {
            let z = sample_gp(&p, &x, r as u64).unwrap();
            acc += &z * z.transpose();
        }
        let emp = acc / reps as f64;
        for i in 0..3 {
            for j in 0..3 {
                let se = ((target[(i, i)] * target[(j, j)] + target[(i, j)].powi(2)) / reps as f64).sqrt();
                assert!((emp[(i, j)] - target[(i, j)]).abs() < 5.0 * se, "({i},{j}) {} vs {}", emp[(i, j)], target[(i, j)]);
            }
        }
    }

    #[test]
    fn duplicate_rows_give_equal_values() {
        let p = KernelParams::new(KernelFamily::Matern52, 1.0, vec![0.3, 0.3], 0.0).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.5, 0.5, 0.1, 0.2]);
        let z = sample_gp(&p, &x, 3).unwrap();
        assert!((z[0] - z[2]).abs() < 1e-4);
    }

    #[test]
    fn deterministic() {
        let p = KernelParams::new(KernelFamily::Matern52, 1.0, vec![0.3], 0.01).unwrap();
        let x = DMatrix::from_row_slice(4, 1, &[0.1, 0.4, 0.6, 0.95]);
        assert_eq!(sample_gp(&p, &x, 8).unwrap(), sample_gp(&p, &x, 8).unwrap());
    }
}
