use super::{LinAlgError, Mat};

/// LU factorization with partial pivoting of a square matrix.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Lu, LinAlgError> {
        if !a.is_square() {
            return Err(LinAlgError::NotSquare { rows: a.rows(), cols: a.cols() });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.norm_max().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= scale * 1e-300 {
                return Err(LinAlgError::Singular { cond: f64::INFINITY });
            }
            if piv != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn det(&self) -> f64 {
        let n = self.lu.rows();
        (0..n).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    /// Solve `A X = B` column by column.
    pub fn solve(&self, b: &Mat) -> Mat {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "rhs row mismatch");
        let mut x = Mat::zeros(n, b.cols());
        for c in 0..b.cols() {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = b[(self.perm[i], c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in (i + 1)..n {
                    s -= self.lu[(i, k)] * y[k];
                }
                y[i] = s / self.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        x
    }

    pub fn inverse(&self) -> Mat {
        self.solve(&Mat::identity(self.lu.rows()))
    }
}

/// Solve `A X = B` for square nonsingular `A`, reporting a 1-norm condition
/// estimate when the system is singular or catastrophically ill-conditioned.
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat, LinAlgError> {
    let lu = Lu::factor(a)?;
    let inv = lu.inverse();
    let cond = a.norm_one() * inv.norm_one();
    if !cond.is_finite() {
        return Err(LinAlgError::Singular { cond });
    }
    Ok(lu.solve(b))
}

/// 1-norm condition estimate `‖A‖₁ ‖A⁻¹‖₁` (∞ for singular input).
pub fn cond_one(a: &Mat) -> f64 {
    match Lu::factor(a) {
        Ok(lu) => a.norm_one() * lu.inverse().norm_one(),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_diagonal() {
        let a = Mat::diag(&[2.0, 4.0]);
        let x = solve(&a, &Mat::identity(2)).unwrap();
        assert!(x.sub_ref(&Mat::diag(&[0.5, 0.25])).norm_max() < 1e-15);
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let b = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let x = solve(&Mat::identity(2), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn singular_reports_error() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            solve(&a, &Mat::identity(2)),
            Err(LinAlgError::Singular { .. })
        ));
    }
}
