use super::Mat;

/// Thin singular value decomposition `A = U Σ Vᵀ`.
///
/// Singular values are sorted descending. `u` is m×k and `v` is n×k with
/// k = min(m, n); columns belonging to zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    /// One-sided Jacobi SVD. Orthogonalizes column pairs of the work matrix
    /// until all cross products are negligible; this gives high relative
    /// accuracy for small singular values, which the rank decisions and
    /// null-space projectors downstream depend on.
    pub fn compute(a: &Mat) -> Svd {
        if a.rows() < a.cols() {
            let t = Svd::compute(&a.transpose());
            return Svd { u: t.v, sigma: t.sigma, v: t.u };
        }
        let m = a.rows();
        let n = a.cols();
        let mut w = a.clone();
        let mut v = Mat::identity(n);
        let eps = f64::EPSILON;

        for _sweep in 0..40 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let mut app = 0.0;
                    let mut aqq = 0.0;
                    let mut apq = 0.0;
                    for i in 0..m {
                        let wp = w[(i, p)];
                        let wq = w[(i, q)];
                        app += wp * wp;
                        aqq += wq * wq;
                        apq += wp * wq;
                    }
                    if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (aqq - app) / (2.0 * apq);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let wp = w[(i, p)];
                        let wq = w[(i, q)];
                        w[(i, p)] = c * wp - s * wq;
                        w[(i, q)] = s * wp + c * wq;
                    }
                    for i in 0..n {
                        let vp = v[(i, p)];
                        let vq = v[(i, q)];
                        v[(i, p)] = c * vp - s * vq;
                        v[(i, q)] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }

        let mut sigma: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());

        let mut u = Mat::zeros(m, n);
        let mut vs = Mat::zeros(n, n);
        let mut sig = vec![0.0; n];
        for (dst, &src) in order.iter().enumerate() {
            sig[dst] = sigma[src];
            if sigma[src] > 0.0 {
                for i in 0..m {
                    u[(i, dst)] = w[(i, src)] / sigma[src];
                }
            }
            for i in 0..n {
                vs[(i, dst)] = v[(i, src)];
            }
        }
        sigma = sig;
        Svd { u, sigma, v: vs }
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values strictly above `tol * sigma_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let cut = tol * self.sigma_max();
        self.sigma.iter().filter(|&&s| s > cut).count()
    }

    /// Moore–Penrose pseudoinverse with the given relative truncation.
    pub fn pinv(&self, tol: f64) -> Mat {
        let r = self.rank(tol);
        let n = self.v.rows();
        let m = self.u.rows();
        let mut out = Mat::zeros(n, m);
        for k in 0..r {
            let inv = 1.0 / self.sigma[k];
            for i in 0..n {
                let vik = self.v[(i, k)] * inv;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out[(i, j)] += vik * self.u[(j, k)];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_diagonal() {
        let a = Mat::diag(&[3.0, -2.0, 0.0]);
        let s = Svd::compute(&a);
        assert!((s.sigma[0] - 3.0).abs() < 1e-12);
        assert!((s.sigma[1] - 2.0).abs() < 1e-12);
        assert!(s.sigma[2].abs() < 1e-12);
        assert_eq!(s.rank(1e-10), 2);
    }

    #[test]
    fn reconstructs_wide_matrix() {
        let a = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let s = Svd::compute(&a);
        // U Σ Vᵀ == A
        let mut rec = Mat::zeros(2, 3);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..3 {
                    rec[(i, j)] += s.u[(i, k)] * s.sigma[k] * s.v[(j, k)];
                }
            }
        }
        assert!(rec.sub_ref(&a).norm_max() < 1e-12);
    }
}
