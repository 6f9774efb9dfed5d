use super::Mat;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted ascending and the matching orthonormal
/// eigenvectors as columns. The input is symmetrized first, so tiny
/// asymmetries from accumulated rounding are tolerated.
pub fn sym_eig(a: &Mat) -> (Vec<f64>, Mat) {
    assert!(a.is_square(), "sym_eig requires a square matrix");
    let n = a.rows();
    let mut w = a.symmetrize();
    let mut v = Mat::identity(n);
    let eps = f64::EPSILON;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += w[(i, j)] * w[(i, j)];
            }
        }
        let scale: f64 = (0..n).map(|i| w[(i, i)] * w[(i, i)]).sum::<f64>().max(1e-300);
        if off <= eps * eps * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].partial_cmp(&w[(j, j)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, dst)] = v[(i, src)];
        }
    }
    (vals, vecs)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn sym_eig_min(a: &Mat) -> f64 {
    sym_eig(a).0[0]
}

/// Largest eigenvalue of the symmetric part of `a`.
pub fn sym_eig_max(a: &Mat) -> f64 {
    *sym_eig(a).0.last().expect("nonempty")
}

/// Cholesky factor L with `A = L Lᵀ`; `None` when `a` is not positive
/// definite (within floating-point).
pub fn cholesky(a: &Mat) -> Option<Mat> {
    assert!(a.is_square(), "cholesky requires a square matrix");
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_hand_computed_spectrum() {
        // [[2,1],[1,2]] has eigenvalues {1, 3}.
        let a = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let (vals, vecs) = sym_eig(&a);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // residual of each eigenpair
        for k in 0..2 {
            let v = vecs.block(0, k, 2, 1);
            let r = a.matmul(&v).sub_ref(&v.scale(vals[k]));
            assert!(r.norm_max() < 1e-12);
        }
    }

    #[test]
    fn cholesky_round_trip() {
        let a = Mat::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        let x = cholesky_solve(&l, &[8.0, 7.0]);
        // verify A x = b
        assert!((4.0 * x[0] + 2.0 * x[1] - 8.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 7.0).abs() < 1e-12);
        assert!(cholesky(&Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]])).is_none());
    }
}
