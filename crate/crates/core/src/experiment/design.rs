//! Maximin Latin hypercube designs on `[0, 1]^d`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{stream_rng, Stream};

/// Pairwise-swap improvement attempts applied by [`generate_design`].
pub const MAXIMIN_SWAPS: usize = 1000;

/// Latin hypercube: column `c` places exactly one point in each stratum `[k/n, (k+1)/n)`.
pub fn latin_hypercube<R: Rng>(n: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, d);
    let mut strata: Vec<usize> = (0..n).collect();
    for c in 0..d {
        strata.shuffle(rng);
        for (i, &k) in strata.iter().enumerate() {
            let u: f64 = rng.random();
            // Guard the open upper end against rounding.
            x[(i, c)] = ((k as f64 + u) / n as f64).min((k as f64 + 1.0) / n as f64 - f64::EPSILON);
        }
    }
    x
}

fn min_sq_distance(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            let d2: f64 = (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
            best = best.min(d2);
        }
    }
    best
}

/// Latin hypercube followed by `swaps` within-column exchanges, each kept
/// only if it does not shrink the minimum inter-point distance.
pub fn maximin_latin_hypercube<R: Rng>(n: usize, d: usize, swaps: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = latin_hypercube(n, d, rng);
    if n < 3 {
        return x;
    }
    let mut current = min_sq_distance(&x);
    for _ in 0..swaps {
        let c = rng.random_range(0..d);
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        x.swap((i, c), (j, c));
        let candidate = min_sq_distance(&x);
        if candidate >= current {
            current = candidate;
        } else {
            x.swap((i, c), (j, c));
        }
    }
    x
}

/// Space-filling design of `n` points in `[0, 1]^d`, deterministic per seed.
pub fn generate_design(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, Stream::Design, 0);
    maximin_latin_hypercube(n, d, MAXIMIN_SWAPS, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_per_stratum(x: &DMatrix<f64>) -> bool {
        let n = x.nrows();
        (0..x.ncols()).all(|c| {
            let mut seen = vec![false; n];
            x.column(c).iter().all(|&v| {
                let k = (v * n as f64).floor() as usize;
                k < n && !std::mem::replace(&mut seen[k], true)
            })
        })
    }

    #[test]
    fn four_points_one_dimension() {
        let x = generate_design(4, 1, 3);
        let mut v: Vec<f64> = x.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        for (k, vi) in v.iter().enumerate() {
            assert!(*vi >= k as f64 / 4.0 && *vi < (k + 1) as f64 / 4.0);
        }
    }

    #[test]
    fn stratification_survives_swaps() {
        for (n, d, seed) in [(10, 2, 1), (37, 3, 2), (5, 5, 3), (1, 2, 4)] {
            assert!(one_per_stratum(&generate_design(n, d, seed)));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_design(30, 2, 99), generate_design(30, 2, 99));
        assert_ne!(generate_design(30, 2, 99), generate_design(30, 2, 100));
    }

    #[test]
    fn swaps_never_shrink_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = latin_hypercube(40, 2, &mut ChaCha8Rng::seed_from_u64(5));
        let improved = maximin_latin_hypercube(40, 2, 500, &mut rng);
        assert!(min_sq_distance(&improved) >= min_sq_distance(&base));
    }
}
