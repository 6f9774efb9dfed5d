//! Small dense real-matrix kernel: factorizations, pseudoinverse, rank
//! decisions, and eigenvalues.
//!
//! Everything downstream (observer algebra, LMI assembly, the feasibility
//! engine, and the delay-differential validators) consumes this module.
//! Instances are immutable after construction and safe to share across
//! threads; all operations are pure functions of their inputs.

mod cx;
mod eig;
mod lu;
mod mat;
mod svd;
mod sym;

pub use cx::CLu;
pub use eig::{eig_values, eig_vector};
pub use lu::{cond_one, solve, Lu};
pub use mat::Mat;
pub use svd::Svd;
pub use sym::{cholesky, cholesky_solve, sym_eig, sym_eig_max, sym_eig_min};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tolerance for rank decisions (relative to the largest
/// singular value). Overridable everywhere a rank decision occurs.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinAlgError {
    #[error("matrix entries must be finite (no NaN or infinity)")]
    NonFinite,
    #[error("invalid shape ({what}): {rows}x{cols}")]
    Shape { what: &'static str, rows: usize, cols: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (relative deviation {deviation:.3e})")]
    NotSymmetric { deviation: f64 },
    #[error("matrix is singular or numerically singular (condition estimate {cond:.3e})")]
    Singular { cond: f64 },
    #[error("{what} did not converge")]
    NoConvergence { what: &'static str },
    #[error("matrix must be nonempty")]
    Empty,
}

/// Eigenvalue set of a square matrix together with its spectral abscissa
/// floor: `min_real` is the smallest real part over all eigenvalues.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub min_real: f64,
}

impl Spectrum {
    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re))
    }

    /// True when every eigenvalue has negative real part.
    pub fn is_hurwitz(&self) -> bool {
        self.max_real() < 0.0
    }
}

/// Moore–Penrose pseudoinverse. Singular values at or below
/// `tol * σ_max` are truncated.
pub fn pinv(a: &Mat, tol: f64) -> Result<Mat, LinAlgError> {
    if a.is_empty() {
        return Err(LinAlgError::Empty);
    }
    Ok(Svd::compute(a).pinv(tol))
}

/// Numerical rank: the number of singular values above `tol * σ_max`.
pub fn rank(a: &Mat, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    Svd::compute(a).rank(tol)
}

/// All eigenvalues of a square matrix.
pub fn eig(a: &Mat) -> Result<Spectrum, LinAlgError> {
    let eigenvalues = eig_values(a)?;
    let min_real = eigenvalues.iter().fold(f64::INFINITY, |m, z| m.min(z.re));
    Ok(Spectrum { eigenvalues, min_real })
}

/// Smallest eigenvalue of `(A + Aᵀ)/2`. Errors when `a` deviates from
/// symmetry by more than `1e-10` relative to its largest entry.
pub fn min_eig_sym(a: &Mat) -> Result<f64, LinAlgError> {
    if !a.is_square() {
        return Err(LinAlgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let scale = 1.0 + a.norm_max();
    let mut dev = 0.0f64;
    for i in 0..a.rows() {
        for j in (i + 1)..a.rows() {
            dev = dev.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if dev > 1e-10 * scale {
        return Err(LinAlgError::NotSymmetric { deviation: dev / scale });
    }
    Ok(sym_eig_min(a))
}

/// Orthogonal projector onto the orthogonal complement of the column space
/// of `a`: `I - A A⁺`. Maps onto the left null space of `a`.
pub fn left_null_projector(a: &Mat, tol: f64) -> Mat {
    let svd = Svd::compute(a);
    let r = svd.rank(tol);
    let m = a.rows();
    let mut proj = Mat::identity(m);
    for k in 0..r {
        for i in 0..m {
            let uik = svd.u[(i, k)];
            if uik == 0.0 {
                continue;
            }
            for j in 0..m {
                proj[(i, j)] -= uik * svd.u[(j, k)];
            }
        }
    }
    proj
}
