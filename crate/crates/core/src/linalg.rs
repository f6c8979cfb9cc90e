//! Dense products with optional transposes, routed through `matrixmultiply`.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    N,
    T,
}

fn strides(m: &DMatrix<f64>, op: Op) -> (usize, usize, isize, isize) {
    // Column-major storage: row stride 1, column stride nrows.
    let (r, c) = m.shape();
    match op {
        Op::N => (r, c, 1, r as isize),
        Op::T => (c, r, r as isize, 1),
    }
}

/// `c ← alpha · op(a) · op(b) + beta · c`
pub(crate) fn gemm(alpha: f64, a: &DMatrix<f64>, op_a: Op, b: &DMatrix<f64>, op_b: Op, beta: f64, c: &mut DMatrix<f64>) {
    let (m, k, rsa, csa) = strides(a, op_a);
    let (kb, n, rsb, csb) = strides(b, op_b);
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!(c.shape(), (m, n), "output shape");
    let rsc = 1isize;
    let csc = m as isize;
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the pointers address fully initialized column-major buffers whose
    // extents match the dimensions and strides passed alongside them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

const TRI_BLOCK: usize = 64;

/// Inverse of a nonsingular lower-triangular matrix, recursively halved so the
/// bulk of the work runs through [`gemm`].
pub(crate) fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    if n <= TRI_BLOCK {
        let mut x = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut col = x.column_mut(j);
            col[j] = 1.0;
            for k in j..n {
                let xk = col[k] / l[(k, k)];
                col[k] = xk;
                if xk != 0.0 {
                    for i in (k + 1)..n {
                        col[i] -= l[(i, k)] * xk;
                    }
                }
            }
        }
        return x;
    }
    let h = n / 2;
    let x11 = lower_triangular_inverse(&l.view((0, 0), (h, h)).into_owned());
    let x22 = lower_triangular_inverse(&l.view((h, h), (n - h, n - h)).into_owned());
    let l21 = l.view((h, 0), (n - h, h)).into_owned();
    let mut t = DMatrix::zeros(n - h, h);
    gemm(1.0, &l21, Op::N, &x11, Op::N, 0.0, &mut t);
    let mut x21 = l21;
    gemm(-1.0, &x22, Op::N, &t, Op::N, 0.0, &mut x21);
    let mut x = DMatrix::zeros(n, n);
    x.view_mut((0, 0), (h, h)).copy_from(&x11);
    x.view_mut((h, h), (n - h, n - h)).copy_from(&x22);
    x.view_mut((h, 0), (n - h, h)).copy_from(&x21);
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transposed_products_match_naive() {
        let a = DMatrix::from_fn(7, 9, |i, j| (i as f64 * 0.3 - j as f64 * 0.7).sin());
        let b = DMatrix::from_fn(7, 8, |i, j| (i as f64 * 1.1 + j as f64 * 0.2).cos());
        let mut c = DMatrix::from_element(9, 8, 1.0);
        gemm(2.0, &a, Op::T, &b, Op::N, 0.5, &mut c);
        let expect = a.transpose() * &b * 2.0 + DMatrix::from_element(9, 8, 0.5);
        assert!((c - expect).amax() < 1e-13);

        let mut d = DMatrix::zeros(9, 9);
        gemm(-1.0, &a, Op::T, &a.transpose(), Op::T, 0.0, &mut d);
        assert!((d + a.transpose() * &a).amax() < 1e-13);
    }

    #[test]
    fn triangular_inverse_matches_solve() {
        for n in [1, 5, 64, 65, 150] {
            let mut l = DMatrix::from_fn(n, n, |i, j| if i >= j { ((i * 3 + j * 5) % 7) as f64 * 0.1 - 0.3 } else { 0.0 });
            for i in 0..n {
                l[(i, i)] = 1.0 + (i % 3) as f64;
            }
            let x = lower_triangular_inverse(&l);
            let err = (&l * &x - DMatrix::<f64>::identity(n, n)).amax();
            assert!(err < 1e-12, "n={n}: {err}");
            assert!((0..n).all(|j| (0..j).all(|i| x[(i, j)] == 0.0)));
        }
    }
}
