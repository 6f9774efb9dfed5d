use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DdeError, DdeSystem};
use crate::linalg::{eig_values, CLu, Mat};

/// Rightmost characteristic roots of a linear DDE.
///
/// `roots` is sorted by descending real part; `rightmost` holds the root(s)
/// attaining the abscissa (a conjugate pair appears as two entries).
/// `residual` is the largest characteristic determinant magnitude over the
/// reported roots; `refined` is false when Newton refinement failed and the
/// raw discretization value is reported instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootReport {
    pub rightmost: Vec<Complex64>,
    pub roots: Vec<Complex64>,
    pub abscissa: f64,
    pub discretization: usize,
    pub residual: f64,
    pub refined: bool,
}

/// `|det(sI − A₀ − Σᵢ Aᵢ e^{−sτᵢ})|` at `s`.
pub fn characteristic_residual(sys: &DdeSystem, s: Complex64) -> f64 {
    match char_matrix_lu(sys, s) {
        Ok(lu) => lu.det().norm(),
        Err(_) => 0.0, // exactly singular: s is a root to machine precision
    }
}

fn char_matrix(sys: &DdeSystem, s: Complex64) -> Vec<Complex64> {
    let n = sys.dim();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = Complex64::new(-sys.a0()[(i, j)], 0.0);
        }
        m[i * n + i] += s;
    }
    for (a, d) in sys.delayed() {
        let w = (-s * *d).exp();
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] -= w * a[(i, j)];
            }
        }
    }
    m
}

fn char_matrix_lu(sys: &DdeSystem, s: Complex64) -> Result<CLu, crate::linalg::LinAlgError> {
    CLu::factor(&char_matrix(sys, s), sys.dim())
}

/// One Newton step on `det T(s) = 0` via `Δs = −1 / tr(T⁻¹ T′)`.
fn newton_refine(sys: &DdeSystem, start: Complex64) -> Option<(Complex64, f64)> {
    let n = sys.dim();
    let mut s = start;
    for _ in 0..60 {
        let lu = char_matrix_lu(sys, s).ok()?;
        // T'(s) = I + Σ τᵢ Aᵢ e^{−sτᵢ}
        let mut tp = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            tp[i * n + i] = Complex64::new(1.0, 0.0);
        }
        for (a, d) in sys.delayed() {
            let w = (-s * *d).exp() * *d;
            for i in 0..n {
                for j in 0..n {
                    tp[i * n + j] += w * a[(i, j)];
                }
            }
        }
        // trace of T⁻¹T' column by column
        let mut trace = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let col: Vec<Complex64> = (0..n).map(|i| tp[i * n + j]).collect();
            let x = lu.solve(&col);
            trace += x[j];
        }
        if trace.norm() < 1e-300 {
            return None;
        }
        let delta = -Complex64::new(1.0, 0.0) / trace;
        s += delta;
        if !s.re.is_finite() || !s.im.is_finite() {
            return None;
        }
        if delta.norm() <= 1e-13 * (1.0 + s.norm()) {
            return Some((s, characteristic_residual(sys, s)));
        }
    }
    None
}

/// Chebyshev extreme points, barycentric weights and differentiation matrix
/// on [−τ_max, 0], ordered from t₀ = 0 down to t_N = −τ_max.
fn cheb(npts: usize, tau_max: f64) -> (Vec<f64>, Mat) {
    let n = npts;
    let xs: Vec<f64> = (0..=n)
        .map(|k| (std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect();
    let ts: Vec<f64> = xs.iter().map(|x| (x - 1.0) * tau_max / 2.0).collect();
    let c = |i: usize| -> f64 {
        let base = if i == 0 || i == n { 2.0 } else { 1.0 };
        base * if i.is_multiple_of(2) { 1.0 } else { -1.0 }
    };
    let mut d = Mat::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut rowsum = 0.0;
        for j in 0..=n {
            if i != j {
                let v = c(i) / c(j) / (xs[i] - xs[j]);
                d[(i, j)] = v;
                rowsum += v;
            }
        }
        d[(i, i)] = -rowsum;
    }
    // chain rule: d/dt = (2/τ_max) d/dx
    (ts, d.scale(2.0 / tau_max))
}

/// Barycentric Lagrange evaluation weights at a query point.
fn barycentric(ts: &[f64], t: f64) -> Vec<f64> {
    let n = ts.len() - 1;
    let w = |i: usize| -> f64 {
        let base = if i == 0 || i == n { 0.5 } else { 1.0 };
        base * if i.is_multiple_of(2) { 1.0 } else { -1.0 }
    };
    for (i, &ti) in ts.iter().enumerate() {
        if (t - ti).abs() < 1e-14 * (1.0 + ti.abs()) {
            let mut l = vec![0.0; ts.len()];
            l[i] = 1.0;
            return l;
        }
    }
    let terms: Vec<f64> = (0..=n).map(|i| w(i) / (t - ts[i])).collect();
    let sum: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / sum).collect()
}

/// Discretize the solution-operator generator on `npts+1` Chebyshev nodes.
fn generator(sys: &DdeSystem, npts: usize) -> Mat {
    let n = sys.dim();
    let tau_max = sys.max_delay();
    let (ts, d) = cheb(npts, tau_max);
    let dim = (npts + 1) * n;
    let mut m = Mat::zeros(dim, dim);
    // row block 0: the DDE right-hand side at t = 0
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = sys.a0()[(i, j)];
        }
    }
    for (a, delay) in sys.delayed() {
        let l = barycentric(&ts, -delay);
        for (k, lk) in l.iter().enumerate() {
            if lk.abs() < 1e-300 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    m[(i, k * n + j)] += lk * a[(i, j)];
                }
            }
        }
    }
    // row blocks 1..npts: differentiation of the interpolant
    for k in 1..=npts {
        for l in 0..=npts {
            let dkl = d[(k, l)];
            if dkl == 0.0 {
                continue;
            }
            for i in 0..n {
                m[(k * n + i, l * n + i)] = dkl;
            }
        }
    }
    m
}

fn candidates(sys: &DdeSystem, npts: usize, keep: usize) -> Result<Vec<Complex64>, DdeError> {
    let m = generator(sys, npts);
    let mut eigs = eig_values(&m)?;
    eigs.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    eigs.truncate(keep);
    Ok(eigs)
}

/// Rightmost characteristic roots by spectral discretization of the
/// generator, refined by Newton iteration on the characteristic equation.
///
/// `grid` is the initial number of Chebyshev intervals (at least 8); it is
/// doubled until the rightmost root moves by less than 1e-6.
pub fn rightmost_roots(sys: &DdeSystem, grid: usize) -> Result<RootReport, DdeError> {
    if grid < 8 {
        return Err(DdeError::Dimension("discretization grid must be at least 8".into()));
    }
    if sys.delayed().is_empty() {
        // ordinary eigenvalue problem
        let mut eigs = eig_values(sys.a0())?;
        eigs.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        let abscissa = eigs.first().map_or(f64::NEG_INFINITY, |z| z.re);
        let rightmost: Vec<Complex64> =
            eigs.iter().copied().filter(|z| (z.re - abscissa).abs() <= 1e-9).collect();
        return Ok(RootReport {
            rightmost,
            roots: eigs,
            abscissa,
            discretization: 0,
            residual: 0.0,
            refined: true,
        });
    }

    let keep = (3 * sys.dim()).max(8);
    let mut npts = grid;
    let mut prev: Option<Complex64> = None;
    let mut report = None;
    for _round in 0..5 {
        let cands = candidates(sys, npts, keep)?;
        // Newton-refine each candidate; spurious discretization eigenvalues
        // either refine onto true roots or are dropped
        let mut refined_roots: Vec<(Complex64, f64)> = Vec::new();
        let mut raw: Vec<(Complex64, f64)> = Vec::new();
        for c in &cands {
            match newton_refine(sys, *c) {
                Some((r, res)) => {
                    if refined_roots
                        .iter()
                        .all(|(x, _)| (x - r).norm() > 1e-7 * (1.0 + r.norm()))
                    {
                        refined_roots.push((r, res));
                    }
                }
                None => raw.push((*c, characteristic_residual(sys, *c))),
            }
        }
        let refined_all = !refined_roots.is_empty();
        let used = if refined_all { refined_roots } else { raw };
        let mut roots: Vec<Complex64> = used.iter().map(|(r, _)| *r).collect();
        let residual = used.iter().fold(0.0f64, |m, (_, res)| m.max(*res));
        roots.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        let top = roots[0];
        let abscissa = top.re;
        let rightmost: Vec<Complex64> =
            roots.iter().copied().filter(|z| (z.re - abscissa).abs() <= 1e-9).collect();
        let done = prev.map(|p| (p - top).norm() < 1e-6).unwrap_or(false);
        prev = Some(top);
        report = Some(RootReport {
            rightmost,
            roots,
            abscissa,
            discretization: npts,
            residual,
            refined: refined_all,
        });
        if done {
            break;
        }
        npts *= 2;
    }
    Ok(report.expect("at least one round"))
}
