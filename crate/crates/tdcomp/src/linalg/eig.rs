use num_complex::Complex64;

use super::cx::CLu;
use super::{LinAlgError, Mat};

/// Eigenvalues of a general real square matrix.
///
/// Balances, reduces to upper Hessenberg form by stabilized elementary
/// similarity transformations, then runs the Francis double-shift QR
/// iteration with exceptional shifts. Values only; eigenvectors are
/// recovered on demand by [`eig_vector`].
pub fn eig_values(a: &Mat) -> Result<Vec<Complex64>, LinAlgError> {
    if !a.is_square() {
        return Err(LinAlgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Parlett–Reinsch balancing: diagonal similarity scaling so that row and
/// column norms match, improving eigenvalue accuracy.
fn balance(a: &mut Mat) {
    let n = a.rows();
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                let mut c2 = c;
                while c2 < g {
                    f *= RADIX;
                    c2 *= sqrdx;
                }
                g = r * RADIX;
                while c2 > g {
                    f /= RADIX;
                    c2 /= sqrdx;
                }
                if (c2 + r) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= ginv;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Reduce to upper Hessenberg form by pivoted elimination similarities.
fn hessenberg(a: &mut Mat) {
    let n = a.rows();
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0f64;
        let mut i = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..n {
                let t = a[(i, j)];
                a[(i, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, i)];
                a[(j, i)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != 0.0 {
            for i2 in (m + 1)..n {
                let mut y = a[(i2, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i2, m - 1)] = y;
                    for j in m..n {
                        let t = a[(m, j)];
                        a[(i2, j)] -= y * t;
                    }
                    for j in 0..n {
                        let t = a[(j, i2)];
                        a[(j, m)] += y * t;
                    }
                }
            }
        }
    }
    // clear the multipliers left below the subdiagonal
    for i in 2..n {
        for j in 0..(i - 1) {
            a[(i, j)] = 0.0;
        }
    }
}

fn sign_of(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; eigenvalues only.
fn hqr(a: &mut Mat) -> Result<Vec<Complex64>, LinAlgError> {
    let n = a.rows();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let eps = f64::EPSILON;

    let mut anorm = 0.0;
    for i in 0..n {
        let j0 = i.saturating_sub(1);
        for j in j0..n {
            anorm += a[(i, j)].abs();
        }
    }
    if anorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // search for a negligible subdiagonal element
            let mut l = 0isize;
            let mut ll = nn;
            while ll >= 1 {
                let mut s = a[(ll as usize - 1, ll as usize - 1)].abs()
                    + a[(ll as usize, ll as usize)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(ll as usize, ll as usize - 1)].abs() <= eps * s {
                    a[(ll as usize, ll as usize - 1)] = 0.0;
                    l = ll;
                    break;
                }
                ll -= 1;
            }
            let x = a[(nn as usize, nn as usize)];
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let y = a[(nn as usize - 1, nn as usize - 1)];
            let w = a[(nn as usize, nn as usize - 1)] * a[(nn as usize - 1, nn as usize)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                let x2 = x + t;
                if q >= 0.0 {
                    z = p + sign_of(z, p);
                    wr[nn as usize - 1] = x2 + z;
                    wr[nn as usize] = wr[nn as usize - 1];
                    if z != 0.0 {
                        wr[nn as usize] = x2 - w / z;
                    }
                    wi[nn as usize - 1] = 0.0;
                    wi[nn as usize] = 0.0;
                } else {
                    wr[nn as usize - 1] = x2 + p;
                    wr[nn as usize] = x2 + p;
                    wi[nn as usize] = z;
                    wi[nn as usize - 1] = -z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(LinAlgError::NoConvergence { what: "QR eigenvalue iteration" });
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 0..=(nn as usize) {
                    a[(i, i)] -= x;
                }
                let s = a[(nn as usize, nn as usize - 1)].abs()
                    + a[(nn as usize - 1, nn as usize - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // look for two consecutive small subdiagonal elements
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let mu = m as usize;
                let z = a[(mu, mu)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(mu + 1, mu)] + a[(mu, mu + 1)];
                q = a[(mu + 1, mu + 1)] - z - rr - ss;
                r = a[(mu + 2, mu + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(mu, mu - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(mu - 1, mu - 1)].abs() + z.abs() + a[(mu + 1, mu + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            let m = m.max(l) as usize;
            let nnu = nn as usize;
            for i in (m + 2)..=nnu {
                a[(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a[(i, i - 3)] = 0.0;
                }
            }
            // double QR step on rows l..=nn, columns m..=nn
            for k in m..nnu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = 0.0;
                    if k != nnu - 1 {
                        r = a[(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign_of((p * p + q * q + r * r).sqrt(), p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m as isize {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nnu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k != nnu - 1 {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let mmin = nnu.min(k + 3);
                for i in (l as usize)..=mmin {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k != nnu - 1 {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

/// Eigenvector for a known eigenvalue by shifted complex inverse iteration.
///
/// The shift is perturbed off the exact eigenvalue so the factorization
/// stays usable; a few iterations give residuals near machine precision
/// for well-separated eigenvalues.
pub fn eig_vector(a: &Mat, lambda: Complex64) -> Result<Vec<Complex64>, LinAlgError> {
    if !a.is_square() {
        return Err(LinAlgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let scale = a.norm_max().max(1.0);
    let shift = lambda + Complex64::new(1e-9 * scale, 1e-9 * scale);
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = Complex64::new(a[(i, j)], 0.0);
        }
        m[i * n + i] -= shift;
    }
    let lu = CLu::factor(&m, n)?;
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0, 0.5 / (i as f64 + 1.0)))
        .collect();
    normalize(&mut v);
    for _ in 0..4 {
        v = lu.solve(&v);
        normalize(&mut v);
    }
    Ok(v)
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_real(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        v
    }

    #[test]
    fn diagonal_spectrum() {
        let vals = sorted_real(eig_values(&Mat::diag(&[3.0, 1.0, 2.0])).unwrap());
        for (got, want) in vals.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got.re - want).abs() < 1e-12 && got.im == 0.0);
        }
    }

    #[test]
    fn complex_pair() {
        // rotation-like matrix with eigenvalues 1 ± 2i
        let a = Mat::from_rows(&[&[1.0, 2.0], &[-2.0, 1.0]]);
        let vals = eig_values(&a).unwrap();
        assert!((vals[0].re - 1.0).abs() < 1e-10);
        assert!((vals[0].im.abs() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn eigenvector_residual() {
        let a = Mat::from_rows(&[&[0.1, 1.0], &[1.0, -2.0]]);
        for lam in eig_values(&a).unwrap() {
            let v = eig_vector(&a, lam).unwrap();
            let mut res = 0.0f64;
            for i in 0..2 {
                let mut av = Complex64::new(0.0, 0.0);
                for j in 0..2 {
                    av += a[(i, j)] * v[j];
                }
                res = res.max((av - lam * v[i]).norm());
            }
            assert!(res < 1e-8 * a.norm_max());
        }
    }
}
