use num_complex::Complex64;

use super::LinAlgError;

/// LU factorization with partial pivoting for small dense complex matrices.
///
/// Backs the shifted inverse iteration for eigenvectors and the Newton
/// refinement of characteristic roots, where the matrices are complex
/// shifts of small real system matrices.
pub struct CLu {
    lu: Vec<Complex64>,
    n: usize,
    perm: Vec<usize>,
    sign: f64,
}

impl CLu {
    pub fn factor(m: &[Complex64], n: usize) -> Result<CLu, LinAlgError> {
        assert_eq!(m.len(), n * n, "matrix buffer size");
        let mut lu = m.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = m.iter().fold(0.0f64, |s, z| s.max(z.norm())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[k * n + k].norm();
            for i in (k + 1)..n {
                let v = lu[i * n + k].norm();
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
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    let v = lu[k * n + j];
                    lu[i * n + j] -= f * v;
                }
            }
        }
        Ok(CLu { lu, n, perm, sign })
    }

    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(self.sign, 0.0);
        for i in 0..self.n {
            d *= self.lu[i * self.n + i];
        }
        d
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = b[self.perm[i]];
            for k in 0..i {
                s -= self.lu[i * n + k] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lu[i * n + k] * y[k];
            }
            y[i] = s / self.lu[i * n + i];
        }
        y
    }
}
