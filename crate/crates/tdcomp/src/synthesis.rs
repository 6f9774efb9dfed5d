//! Observer-parameter determination: rank conditions, generalized-inverse
//! formulas, null-space parameterization, case dispatch, functional
//! augmentation, and two-delay assembly.
//!
//! The pipeline solves the decoupling equations exactly; the one remaining
//! degree of freedom (the internal delay gain) is either supplied by the
//! caller or found by the `lmi`/`sdp` stabilization machinery.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dde::DdeSystem;
use crate::linalg::{self, Mat, DEFAULT_RANK_TOL};
use crate::model::{
    error_coefficients, Functional, FunctionalObserver, MeasurementModel, ModelError, Plant,
    EXACT_RESIDUAL_TOL,
};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("row-space condition fails: an observer of this order does not exist; augment the functional (case 3)")]
    Case3Required,
    #[error("the stacked output map has full column rank; this is the full-rank case (case 1), not case 2")]
    WrongCase,
    #[error("the decoupling system leaves no design freedom (the stacked map has full row rank)")]
    NoFreedom,
    #[error("the null-space parameterization is zero: no delayed-gain freedom to stabilize with")]
    NoStabilizationFreedom,
    #[error("augmentation was requested but the row-space condition already holds")]
    AugmentationNotNeeded,
    #[error("internal contradiction: Krylov stack rank equals the functional dimension, so the row-space condition should have held")]
    AugmentationContradiction,
    #[error("two-delay decoupling equations are only solvable when the stacked two-delay map has rank 2n; this rank-deficient case is unsupported")]
    TwoDelayRankDeficient,
    #[error("expected a {expected} measurement model")]
    MeasurementVariant { expected: &'static str },
    #[error("assembled observer is inconsistent: coupling residual {residual:.3e}")]
    Inconsistent { residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    LinAlg(#[from] linalg::LinAlgError),
}

/// Which branch of the synthesis procedure applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    /// Stacked output map has rank n: the delayed gain is free.
    Case1FullRank,
    /// Rank-deficient output stack: stabilize through the reduced
    /// null-space parameterization.
    Case2Structured,
    /// Row-space condition fails: augment the functional and retry.
    Case3AugmentThenRetry,
}

/// Functional enlarged with extra rows so the row-space condition holds.
#[derive(Debug, Clone)]
pub struct AugmentedFunctional {
    /// The q×n augmented functional; its first m rows are the original F.
    pub f_bar: Functional,
    /// The added rows.
    pub r: Mat,
    /// Extraction matrix `(I_m | 0)` recovering the original functional.
    pub k: Mat,
}

/// `rank(FA; F) = rank(F)`: the condition for an order-m observer to exist.
pub fn check_rank_condition(func: &Functional, plant: &Plant) -> bool {
    let fa = func.f.matmul(&plant.a);
    let stack = Mat::vstack(&[&fa, &func.f]);
    linalg::rank(&stack, DEFAULT_RANK_TOL) == linalg::rank(&func.f, DEFAULT_RANK_TOL)
}

/// Observer state matrix `N = F A F⁺`. Requires the row-space condition;
/// then `NF − FA = 0` holds exactly up to rounding.
pub fn compute_n(func: &Functional, plant: &Plant) -> Result<Mat, SynthesisError> {
    if !check_rank_condition(func, plant) {
        return Err(SynthesisError::Case3Required);
    }
    let f_pinv = linalg::pinv(&func.f, DEFAULT_RANK_TOL)?;
    Ok(func.f.matmul(&plant.a).matmul(&f_pinv))
}

/// The (m+2p)×n decoupling stack `Θ = (F; C_τ; C_τ A)`.
pub fn build_theta(
    func: &Functional,
    meas: &MeasurementModel,
    plant: &Plant,
) -> Result<Mat, SynthesisError> {
    let MeasurementModel::Single { c_tau, .. } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "single-delay" });
    };
    let ca = c_tau.matmul(&plant.a);
    Ok(Mat::vstack(&[&func.f, c_tau, &ca]))
}

/// Null-space parameterization of the decoupling equation `XΘ = 0`: every
/// solution is `X = Z (I − ΘΘ⁺)` for free `Z`. Errors when Θ has full row
/// rank (the projector vanishes and no freedom remains).
pub fn nullspace_parameterization(theta: &Mat) -> Result<Mat, SynthesisError> {
    if linalg::rank(theta, DEFAULT_RANK_TOL) == theta.rows() {
        return Err(SynthesisError::NoFreedom);
    }
    Ok(linalg::left_null_projector(theta, DEFAULT_RANK_TOL))
}

/// Gains recovered by the full-rank branch.
#[derive(Debug, Clone)]
pub struct CaseOneGains {
    pub x_bar: Mat,
    pub g_bar: Mat,
    pub m: Mat,
}

/// Case 1: with `rank(C_τ; C_τA) = n`, the equation `X̄ Θ̄ = −N_τ F` is
/// solvable for any delayed gain; `X̄ = −N_τ F Θ̄⁺` splits as `(Ḡ | M)`.
pub fn case1_solve_xbar(
    n_tau: &Mat,
    func: &Functional,
    meas: &MeasurementModel,
    plant: &Plant,
) -> Result<CaseOneGains, SynthesisError> {
    let MeasurementModel::Single { c_tau, .. } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "single-delay" });
    };
    let p = c_tau.rows();
    let n = plant.state_dim();
    let theta_bar = Mat::vstack(&[c_tau, &c_tau.matmul(&plant.a)]);
    if linalg::rank(&theta_bar, DEFAULT_RANK_TOL) != n {
        return Err(SynthesisError::WrongCase);
    }
    let x_bar = n_tau
        .matmul(&func.f)
        .scale(-1.0)
        .matmul(&linalg::pinv(&theta_bar, DEFAULT_RANK_TOL)?);
    let g_bar = x_bar.block(0, 0, x_bar.rows(), p);
    let m = x_bar.block(0, p, x_bar.rows(), p);
    Ok(CaseOneGains { x_bar, g_bar, m })
}

/// Complete a single-delay observer from its independent pieces and verify
/// the decoupling residual.
pub fn assemble_single(
    plant: &Plant,
    meas: &MeasurementModel,
    func: &Functional,
    n: &Mat,
    n_tau: &Mat,
    g_bar: &Mat,
    m: &Mat,
) -> Result<FunctionalObserver, SynthesisError> {
    let MeasurementModel::Single { c_tau, tau } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "single-delay" });
    };
    let j = func.f.matmul(&plant.b);
    let j_tau = m.matmul(&c_tau.matmul(&plant.b)).scale(-1.0);
    let g = g_bar.add_ref(&n.matmul(m));
    let g_tau = n_tau.matmul(m);
    let obs = FunctionalObserver::single(
        m.clone(),
        n.clone(),
        n_tau.clone(),
        g,
        g_tau,
        j,
        j_tau,
        *tau,
    )?;
    let coeffs = error_coefficients(plant, meas, func, &obs)?;
    if coeffs.residual_norm > EXACT_RESIDUAL_TOL {
        return Err(SynthesisError::Inconsistent { residual: coeffs.residual_norm });
    }
    Ok(obs)
}

/// Reduced stabilization data for case 2.
#[derive(Debug, Clone)]
pub struct CaseTwoReduction {
    /// Full-row-rank v×m matrix built from independent rows of `N_τ2`.
    pub n_bar: Mat,
    /// Indices of the selected rows inside `N_τ2`.
    pub rows: Vec<usize>,
    /// Width of the original parameterization (m+2p).
    pub z_width: usize,
}

impl CaseTwoReduction {
    /// Rebuild a full free matrix `Z` from the reduced `Z̄` so that
    /// `Z · N_τ2 = Z̄ · N̄`: place the columns of `Z̄` at the selected row
    /// indices and zeros elsewhere.
    pub fn embed(&self, z_bar: &Mat) -> Mat {
        assert_eq!(z_bar.cols(), self.rows.len(), "reduced gain width");
        let mut z = Mat::zeros(z_bar.rows(), self.z_width);
        for (col, &row_idx) in self.rows.iter().enumerate() {
            for i in 0..z_bar.rows() {
                z[(i, row_idx)] = z_bar[(i, col)];
            }
        }
        z
    }
}

/// Greedily select a maximal independent row set, scanning top-down from
/// the rows already selected.
fn independent_rows(mat: &Mat, target_rank: usize, preselected: usize) -> Vec<usize> {
    let mut selected: Vec<usize> = (0..preselected).collect();
    for i in preselected..mat.rows() {
        if selected.len() == target_rank {
            break;
        }
        let picked: Vec<Mat> = selected
            .iter()
            .chain(std::iter::once(&i))
            .map(|&r| Mat::from_vec(1, mat.cols(), mat.row(r).to_vec()).expect("finite"))
            .collect();
        let refs: Vec<&Mat> = picked.iter().collect();
        if linalg::rank(&Mat::vstack(&refs), DEFAULT_RANK_TOL) == selected.len() + 1 {
            selected.push(i);
        }
    }
    selected
}

/// Case 2: compress `Z·N_τ2` to `Z̄·N̄` with `N̄` of full row rank
/// v = rank(N_τ2), keeping the leading independent rows.
pub fn case2_reduce(n_tau2: &Mat, tol: f64) -> Result<CaseTwoReduction, SynthesisError> {
    let v = linalg::rank(n_tau2, tol);
    if v == 0 {
        return Err(SynthesisError::NoStabilizationFreedom);
    }
    let rows = independent_rows(n_tau2, v, 0);
    let picked: Vec<Mat> = rows
        .iter()
        .map(|&r| Mat::from_vec(1, n_tau2.cols(), n_tau2.row(r).to_vec()).expect("finite"))
        .collect();
    let refs: Vec<&Mat> = picked.iter().collect();
    Ok(CaseTwoReduction { n_bar: Mat::vstack(&refs), rows, z_width: n_tau2.rows() })
}

/// Case 3: augment the functional with rows of the Krylov stack
/// `(F; FA; …; FAⁿ⁻¹)` until the row-space condition holds.
///
/// Rows are scanned in block order and added greedily when they increase
/// rank, so the result is deterministic and keeps the original F on top.
pub fn augment(func: &Functional, plant: &Plant) -> Result<AugmentedFunctional, SynthesisError> {
    if check_rank_condition(func, plant) {
        return Err(SynthesisError::AugmentationNotNeeded);
    }
    let n = plant.state_dim();
    let m = func.dim();
    let mut blocks: Vec<Mat> = vec![func.f.clone()];
    for _ in 1..n {
        let last = blocks.last().expect("nonempty");
        blocks.push(last.matmul(&plant.a));
    }
    let refs: Vec<&Mat> = blocks.iter().collect();
    let f0 = Mat::vstack(&refs);
    let q = linalg::rank(&f0, DEFAULT_RANK_TOL);
    if q == m {
        return Err(SynthesisError::AugmentationContradiction);
    }
    let rows = independent_rows(&f0, q, m);
    augmented_from_rows(func, &f0, &rows, m)
}

/// Case 3 with caller-chosen extra rows (the added rows must make `F̄` full
/// row rank and satisfy the row-space condition).
pub fn augment_with_rows(
    func: &Functional,
    plant: &Plant,
    extra: &Mat,
) -> Result<AugmentedFunctional, SynthesisError> {
    if extra.cols() != plant.state_dim() {
        return Err(SynthesisError::Dimension("augmentation row width".into()));
    }
    let f_bar = Mat::vstack(&[&func.f, extra]);
    let aug = AugmentedFunctional {
        f_bar: Functional::new(f_bar)?,
        r: extra.clone(),
        k: extraction_matrix(func.dim(), func.dim() + extra.rows()),
    };
    if !check_rank_condition(&aug.f_bar, plant) {
        return Err(SynthesisError::Case3Required);
    }
    Ok(aug)
}

fn augmented_from_rows(
    func: &Functional,
    f0: &Mat,
    rows: &[usize],
    m: usize,
) -> Result<AugmentedFunctional, SynthesisError> {
    let extra_rows: Vec<Mat> = rows
        .iter()
        .filter(|&&r| r >= m)
        .map(|&r| Mat::from_vec(1, f0.cols(), f0.row(r).to_vec()).expect("finite"))
        .collect();
    let mut parts: Vec<&Mat> = vec![&func.f];
    parts.extend(extra_rows.iter());
    let f_bar = Mat::vstack(&parts);
    let q = f_bar.rows();
    let r = if q > m { f_bar.block(m, 0, q - m, f_bar.cols()) } else { Mat::zeros(0, f_bar.cols()) };
    Ok(AugmentedFunctional {
        f_bar: Functional::new(f_bar)?,
        r,
        k: extraction_matrix(m, q),
    })
}

fn extraction_matrix(m: usize, q: usize) -> Mat {
    let mut k = Mat::zeros(m, q);
    for i in 0..m {
        k[(i, i)] = 1.0;
    }
    k
}

/// Stacked two-delay solvability test:
/// `rank (C_τ C_h; C_τA C_hA) = 2n`.
pub fn two_delay_rank_check(
    meas: &MeasurementModel,
    plant: &Plant,
) -> Result<bool, SynthesisError> {
    let MeasurementModel::TwoDelay { c_tau, c_h, .. } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "two-delay" });
    };
    let stack = two_delay_stack(c_tau, c_h, plant);
    Ok(linalg::rank(&stack, DEFAULT_RANK_TOL) == 2 * plant.state_dim())
}

fn two_delay_stack(c_tau: &Mat, c_h: &Mat, plant: &Plant) -> Mat {
    let top = Mat::hstack(&[c_tau, c_h]);
    let bottom = Mat::hstack(&[&c_tau.matmul(&plant.a), &c_h.matmul(&plant.a)]);
    Mat::vstack(&[&top, &bottom])
}

/// Two-delay decoupling solve: `X̄ = Υ Θ̄ₑ⁺` with `Υ = −(N_τF | N_hF)`,
/// split as `(Ḡ | M)`.
pub fn two_delay_solve(
    n_tau: &Mat,
    n_h: &Mat,
    func: &Functional,
    meas: &MeasurementModel,
    plant: &Plant,
) -> Result<CaseOneGains, SynthesisError> {
    let MeasurementModel::TwoDelay { c_tau, c_h, .. } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "two-delay" });
    };
    if !two_delay_rank_check(meas, plant)? {
        return Err(SynthesisError::TwoDelayRankDeficient);
    }
    let p = c_tau.rows();
    let upsilon = Mat::hstack(&[
        &n_tau.matmul(&func.f).scale(-1.0),
        &n_h.matmul(&func.f).scale(-1.0),
    ]);
    let stack = two_delay_stack(c_tau, c_h, plant);
    let x_bar = upsilon.matmul(&linalg::pinv(&stack, DEFAULT_RANK_TOL)?);
    let g_bar = x_bar.block(0, 0, x_bar.rows(), p);
    let m = x_bar.block(0, p, x_bar.rows(), p);
    Ok(CaseOneGains { x_bar, g_bar, m })
}

/// Complete a two-delay observer and verify the decoupling residual.
#[allow(clippy::too_many_arguments)]
pub fn assemble_two_delay(
    plant: &Plant,
    meas: &MeasurementModel,
    func: &Functional,
    n: &Mat,
    n_tau: &Mat,
    n_h: &Mat,
    g_bar: &Mat,
    m: &Mat,
) -> Result<FunctionalObserver, SynthesisError> {
    let MeasurementModel::TwoDelay { c_tau, c_h, tau, h } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "two-delay" });
    };
    let j = func.f.matmul(&plant.b);
    let j_tau = m.matmul(&c_tau.matmul(&plant.b)).scale(-1.0);
    let j_h = m.matmul(&c_h.matmul(&plant.b)).scale(-1.0);
    let g = g_bar.add_ref(&n.matmul(m));
    let g_tau = n_tau.matmul(m);
    let g_h = n_h.matmul(m);
    let obs = FunctionalObserver::two_delay(
        m.clone(),
        n.clone(),
        n_tau.clone(),
        n_h.clone(),
        g,
        g_tau,
        g_h,
        j,
        j_tau,
        j_h,
        *tau,
        *h,
    )?;
    let coeffs = error_coefficients(plant, meas, func, &obs)?;
    if coeffs.residual_norm > EXACT_RESIDUAL_TOL {
        return Err(SynthesisError::Inconsistent { residual: coeffs.residual_norm });
    }
    Ok(obs)
}

/// Re-measure through an extra artificial delay α: the single channel
/// `y(t) = C_τ x(t−τ)` becomes the stacked two-delay model
/// `(C_τ; 0) x(t−τ) + (0; C_τ) x(t−h)` with `h = τ + α`. Whenever
/// `rank(C_τ; C_τA) = n`, the stacked model passes the two-delay rank check.
pub fn extend_measurement(
    meas: &MeasurementModel,
    alpha: f64,
) -> Result<MeasurementModel, SynthesisError> {
    let MeasurementModel::Single { c_tau, tau } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "single-delay" });
    };
    if !(alpha > 0.0) {
        return Err(SynthesisError::Dimension("alpha must be positive".into()));
    }
    let p = c_tau.rows();
    let n = c_tau.cols();
    let zero = Mat::zeros(p, n);
    let c_tau_ext = Mat::vstack(&[c_tau, &zero]);
    let c_h_ext = Mat::vstack(&[&zero, c_tau]);
    Ok(MeasurementModel::two_delay(c_tau_ext, c_h_ext, *tau, tau + alpha)?)
}

/// Closed-loop realizations when the estimated functional is the feedback
/// signal `u = ẑ`:
///
/// * the state-error system in (x, e_aug) with block upper-triangular
///   dynamics, whose characteristic roots are the union of `σ(A+BF)` and
///   the error-system roots, and
/// * the state-observer system in (x, w) with delays τ and 2τ.
pub fn closed_loop_systems(
    plant: &Plant,
    meas: &MeasurementModel,
    func_aug: &Functional,
    obs: &FunctionalObserver,
    k: &Mat,
) -> Result<(DdeSystem, DdeSystem), SynthesisError> {
    let MeasurementModel::Single { c_tau, tau } = meas else {
        return Err(SynthesisError::MeasurementVariant { expected: "single-delay" });
    };
    let n = plant.state_dim();
    let q = obs.order();
    if k.rows() != plant.input_dim() || k.cols() != q {
        return Err(SynthesisError::Dimension("extraction matrix shape".into()));
    }
    if func_aug.dim() != q || func_aug.f.cols() != n {
        return Err(SynthesisError::Dimension("augmented functional shape".into()));
    }
    // F = K F̄: the stabilizing feedback block
    let f_gain = k.matmul(&func_aug.f);

    // state-error system, dimension n + q
    let dim = n + q;
    let mut a0 = Mat::zeros(dim, dim);
    a0.set_block(0, 0, &plant.a.add_ref(&plant.b.matmul(&f_gain)));
    a0.set_block(0, n, &plant.b.matmul(k));
    a0.set_block(n, n, &obs.n);
    let mut d_tau = Mat::zeros(dim, dim);
    d_tau.set_block(n, n, &obs.n_tau);
    let delayed = if d_tau.norm_max() > 0.0 { vec![(d_tau, *tau)] } else { Vec::new() };
    let state_error = DdeSystem::new(a0, delayed)
        .map_err(|e| SynthesisError::Dimension(format!("state-error system: {e}")))?;

    // state-observer system, dimension n + q, delays τ and 2τ
    let km = k.matmul(&obs.m);
    let n_t = obs.n.add_ref(&obs.j.matmul(k));
    let n_tau_t = obs.n_tau.add_ref(&obs.j_tau.matmul(k));
    let g_t = obs.g.add_ref(&obs.j.matmul(&km));
    let g_tau_t = obs.g_tau.add_ref(&obs.j_tau.matmul(&km));

    let mut b0 = Mat::zeros(dim, dim);
    b0.set_block(0, 0, &plant.a);
    b0.set_block(0, n, &plant.b.matmul(k));
    b0.set_block(n, n, &n_t);
    let mut b_tau = Mat::zeros(dim, dim);
    b_tau.set_block(0, 0, &plant.b.matmul(&km).matmul(c_tau));
    b_tau.set_block(n, 0, &g_t.matmul(c_tau));
    b_tau.set_block(n, n, &n_tau_t);
    let mut b_2tau = Mat::zeros(dim, dim);
    b_2tau.set_block(n, 0, &g_tau_t.matmul(c_tau));
    let mut delayed2 = vec![(b_tau, *tau)];
    if b_2tau.norm_max() > 0.0 {
        delayed2.push((b_2tau, 2.0 * tau));
    }
    let state_observer = DdeSystem::new(b0, delayed2)
        .map_err(|e| SynthesisError::Dimension(format!("state-observer system: {e}")))?;

    Ok((state_error, state_observer))
}

/// Convenience wrapper: `N_τ2 = (I − ΘΘ⁺) ℐ₁`, the first m columns of the
/// left-null projector of Θ.
pub fn ntau2_from_theta(theta: &Mat, m: usize) -> Result<Mat, SynthesisError> {
    if linalg::rank(theta, DEFAULT_RANK_TOL) == theta.rows() {
        return Err(SynthesisError::NoFreedom);
    }
    let proj = linalg::left_null_projector(theta, DEFAULT_RANK_TOL);
    Ok(proj.block(0, 0, proj.rows(), m))
}

/// Spectral containment helper used by tests and reports: true when every
/// eigenvalue of `n` is within `tol` of some eigenvalue of `a`.
pub fn spectrum_contained(n: &Mat, a: &Mat, tol: f64) -> Result<bool, SynthesisError> {
    let sn = linalg::eig(n)?;
    let sa = linalg::eig(a)?;
    Ok(sn.eigenvalues.iter().all(|ln| {
        sa.eigenvalues.iter().any(|la| (ln - la).norm() <= tol)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex3() -> (Plant, MeasurementModel, Functional) {
        let plant = Plant::new(
            Mat::from_rows(&[&[0.1, 1.0], &[0.0, 0.5]]),
            Mat::col_vec(&[1.0, 2.0]),
        )
        .unwrap();
        let meas = MeasurementModel::single(Mat::row_vec(&[1.0, 0.0]), 1.0).unwrap();
        let func = Functional::new(Mat::row_vec(&[0.0, 1.0])).unwrap();
        (plant, meas, func)
    }

    fn ex7_plant() -> Plant {
        Plant::new(
            Mat::from_rows(&[&[0.0, 1.0], &[0.1, 0.2]]),
            Mat::col_vec(&[0.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn rank_condition_cases() {
        let (plant, _, func) = ex3();
        assert!(check_rank_condition(&func, &plant));
        let id = Functional::new(Mat::identity(2)).unwrap();
        assert!(check_rank_condition(&id, &plant));
        let plant7 = ex7_plant();
        let f7 = Functional::new(Mat::row_vec(&[-0.6, -1.7])).unwrap();
        assert!(!check_rank_condition(&f7, &plant7));
    }

    #[test]
    fn observer_state_matrix_from_pinv() {
        let (plant, _, func) = ex3();
        let n = compute_n(&func, &plant).unwrap();
        assert!((n[(0, 0)] - 0.5).abs() < 1e-12);

        // three-state plant estimating the last two states
        let plant4 = Plant::new(
            Mat::from_rows(&[&[0.1, 1.0, 1.0], &[0.0, 0.2, 1.0], &[0.0, -1.0, -0.1]]),
            Mat::col_vec(&[1.0, 2.0, 3.0]),
        )
        .unwrap();
        let func4 = Functional::new(Mat::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]))
            .unwrap();
        let n4 = compute_n(&func4, &plant4).unwrap();
        let want = Mat::from_rows(&[&[0.2, 1.0], &[-1.0, -0.1]]);
        assert!(n4.sub_ref(&want).norm_max() < 1e-12);

        // augmented functional of the closed-loop design example
        let plant7 = ex7_plant();
        let f_bar = Functional::new(Mat::from_rows(&[&[-0.6, -1.7], &[0.0, 1.0]])).unwrap();
        let n7 = compute_n(&f_bar, &plant7).unwrap();
        let want7 = Mat::from_rows(&[&[0.2833, -0.4583], &[-0.1667, -0.0833]]);
        assert!(n7.sub_ref(&want7).norm_max() < 2e-4, "{n7}");
    }

    #[test]
    fn theta_stack_shapes() {
        let (plant, meas, func) = ex3();
        let theta = build_theta(&func, &meas, &plant).unwrap();
        assert_eq!((theta.rows(), theta.cols()), (3, 2));
        // identity measurement of the full state: 6×2 stack (I; I; A)
        let plant1 = Plant::new(
            Mat::from_rows(&[&[0.1, 1.0], &[1.0, -2.0]]),
            Mat::col_vec(&[1.0, 2.0]),
        )
        .unwrap();
        let meas1 = MeasurementModel::single(Mat::identity(2), 1.0).unwrap();
        let func1 = Functional::new(Mat::identity(2)).unwrap();
        let theta1 = build_theta(&func1, &meas1, &plant1).unwrap();
        assert_eq!((theta1.rows(), theta1.cols()), (6, 2));
        assert!(theta1.block(4, 0, 2, 2).sub_ref(&plant1.a).norm_max() < 1e-15);
    }

    #[test]
    fn nullspace_parameterization_matches_printed_values() {
        // three-state, one-output design: the published 4×2 parameterization
        let plant = Plant::new(
            Mat::from_rows(&[&[0.1, 1.0, 1.0], &[0.0, 0.2, 1.0], &[0.0, -1.0, -0.1]]),
            Mat::col_vec(&[1.0, 2.0, 3.0]),
        )
        .unwrap();
        let meas = MeasurementModel::single(Mat::row_vec(&[1.0, 0.0, 0.0]), 1.0).unwrap();
        let func = Functional::new(Mat::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]))
            .unwrap();
        let theta = build_theta(&func, &meas, &plant).unwrap();
        let n_tau2 = ntau2_from_theta(&theta, 2).unwrap();
        let want = Mat::from_rows(&[
            &[0.3322, 0.3322],
            &[0.3322, 0.3322],
            &[0.0332, 0.0332],
            &[-0.3322, -0.3322],
        ]);
        assert!(n_tau2.sub_ref(&want).norm_max() < 2e-4, "{n_tau2}");
        // columns of N_τ2 live in the left null space of Θ
        assert!(n_tau2.transpose().matmul(&theta).norm_max() < 1e-12);
    }

    #[test]
    fn full_row_rank_theta_has_no_freedom() {
        let theta = Mat::identity(3);
        assert!(matches!(
            ntau2_from_theta(&theta, 1),
            Err(SynthesisError::NoFreedom)
        ));
    }

    #[test]
    fn case1_recovers_scalar_gains() {
        let (plant, meas, func) = ex3();
        let gains = case1_solve_xbar(&Mat::scalar(-0.7), &func, &meas, &plant).unwrap();
        assert!((gains.g_bar[(0, 0)] + 0.07).abs() < 1e-12);
        assert!((gains.m[(0, 0)] - 0.7).abs() < 1e-12);
        // defining equation X̄Θ̄ = −N_τF holds exactly
        let theta_bar = Mat::vstack(&[meas.c_tau(), &meas.c_tau().matmul(&plant.a)]);
        let lhs = gains.x_bar.matmul(&theta_bar);
        let rhs = Mat::scalar(-0.7).matmul(&func.f).scale(-1.0);
        assert!(lhs.sub_ref(&rhs).norm_max() < 1e-12);
    }

    #[test]
    fn case1_zero_gain_gives_zero_xbar() {
        let (plant, meas, func) = ex3();
        let gains = case1_solve_xbar(&Mat::scalar(0.0), &func, &meas, &plant).unwrap();
        assert!(gains.x_bar.norm_max() < 1e-15);
    }

    #[test]
    fn assemble_matches_printed_scalar_observer() {
        let (plant, meas, func) = ex3();
        let n = compute_n(&func, &plant).unwrap();
        let n_tau = Mat::scalar(-0.7);
        let gains = case1_solve_xbar(&n_tau, &func, &meas, &plant).unwrap();
        let obs =
            assemble_single(&plant, &meas, &func, &n, &n_tau, &gains.g_bar, &gains.m).unwrap();
        assert!((obs.g[(0, 0)] - 0.28).abs() < 1e-12);
        assert!((obs.g_tau[(0, 0)] + 0.49).abs() < 1e-12);
        assert!((obs.j[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((obs.j_tau[(0, 0)] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn case2_reduction_keeps_leading_row() {
        let n_tau2 = Mat::from_rows(&[
            &[0.3322, 0.3322],
            &[0.3322, 0.3322],
            &[0.0332, 0.0332],
            &[-0.3322, -0.3322],
        ]);
        let red = case2_reduce(&n_tau2, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(red.rows, vec![0]);
        assert!((red.n_bar[(0, 0)] - 0.3322).abs() < 1e-12);
        // embed reproduces Z N_τ2 = Z̄ N̄
        let z_bar = Mat::col_vec(&[-1.1384, 0.2522]);
        let z = red.embed(&z_bar);
        let left = z.matmul(&n_tau2);
        let right = z_bar.matmul(&red.n_bar);
        assert!(left.sub_ref(&right).norm_max() < 1e-12);
    }

    #[test]
    fn case2_reduce_identity_is_identity() {
        let padded = Mat::vstack(&[&Mat::identity(2), &Mat::zeros(2, 2)]);
        let red = case2_reduce(&padded, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(red.rows, vec![0, 1]);
        assert!(red.n_bar.sub_ref(&Mat::identity(2)).norm_max() < 1e-15);
        assert!(matches!(
            case2_reduce(&Mat::zeros(3, 2), DEFAULT_RANK_TOL),
            Err(SynthesisError::NoStabilizationFreedom)
        ));
    }

    #[test]
    fn augmentation_repairs_rank_condition() {
        let plant = ex7_plant();
        let func = Functional::new(Mat::row_vec(&[-0.6, -1.7])).unwrap();
        let aug = augment(&func, &plant).unwrap();
        assert_eq!(aug.f_bar.dim(), 2);
        assert!(check_rank_condition(&aug.f_bar, &plant));
        assert_eq!(aug.k.cols(), 2);
        // the published choice of extra row works too
        let aug2 = augment_with_rows(&func, &plant, &Mat::row_vec(&[0.0, 1.0])).unwrap();
        assert!(check_rank_condition(&aug2.f_bar, &plant));
        // identity functional needs no augmentation
        let id = Functional::new(Mat::identity(2)).unwrap();
        assert!(matches!(
            augment(&id, &plant),
            Err(SynthesisError::AugmentationNotNeeded)
        ));
    }

    #[test]
    fn two_delay_rank_and_solve_scalar_design() {
        let plant = Plant::new(
            Mat::from_rows(&[&[0.1, 1.0], &[0.0, 0.5]]),
            Mat::col_vec(&[1.0, 2.0]),
        )
        .unwrap();
        let meas = MeasurementModel::two_delay(
            Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
            Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
            2.3,
            3.0,
        )
        .unwrap();
        assert!(two_delay_rank_check(&meas, &plant).unwrap());
        let func = Functional::new(Mat::row_vec(&[0.0, 1.0])).unwrap();
        let gains = two_delay_solve(
            &Mat::scalar(-0.8566),
            &Mat::scalar(0.3509),
            &func,
            &meas,
            &plant,
        )
        .unwrap();
        let want = Mat::row_vec(&[-0.0857, 0.0351, 0.8566, -0.3509]);
        assert!(gains.x_bar.sub_ref(&want).norm_max() < 2e-4, "{}", gains.x_bar);
    }

    #[test]
    fn duplicated_channel_fails_two_delay_rank() {
        let plant = Plant::new(Mat::identity(2), Mat::col_vec(&[0.0, 0.0])).unwrap();
        let c = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let meas = MeasurementModel::two_delay(c.clone(), c, 1.0, 2.0).unwrap();
        assert!(!two_delay_rank_check(&meas, &plant).unwrap());
        // the decoupling solve refuses this unsupported configuration
        let func = Functional::new(Mat::row_vec(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            two_delay_solve(&Mat::scalar(-0.5), &Mat::scalar(0.1), &func, &meas, &plant),
            Err(SynthesisError::TwoDelayRankDeficient)
        ));
    }

    #[test]
    fn extended_measurement_block_pattern() {
        let (_, meas, _) = ex3();
        let ext = extend_measurement(&meas, 0.7).unwrap();
        let MeasurementModel::TwoDelay { c_tau, c_h, tau, h } = ext else {
            panic!("expected two-delay")
        };
        assert!((tau - 1.0).abs() < 1e-15 && (h - 1.7).abs() < 1e-15);
        assert!(c_tau.sub_ref(&Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]])).norm_max() < 1e-15);
        assert!(c_h.sub_ref(&Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]])).norm_max() < 1e-15);
    }
}
