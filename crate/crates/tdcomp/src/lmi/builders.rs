use super::{
    Constraint, Extraction, LmiError, LmiProblem, SelectorBasis, Sense, Term, VarBlock, VarKind,
};
use crate::linalg::Mat;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Strictness margin scaled to the problem data.
fn epsilon_for(n_mat: &Mat) -> f64 {
    1e-6 * (1.0 + n_mat.norm_fro())
}

struct Builder {
    vars: Vec<VarBlock>,
    constraints: Vec<Constraint>,
}

impl Builder {
    fn new() -> Self {
        Builder { vars: Vec::new(), constraints: Vec::new() }
    }

    fn var(&mut self, name: &str, kind: VarKind) -> usize {
        self.vars.push(VarBlock { name: name.into(), kind });
        self.vars.len() - 1
    }

    /// Positive-definite variable: declares the block and the `≻ 0`
    /// constraint that realizes it.
    fn pd_var(&mut self, name: &str, n: usize) -> usize {
        let idx = self.var(name, VarKind::SymmetricPd(n));
        let mut map = MapBuilder::new(n);
        map.pair(idx, &Mat::identity(n), &Mat::identity(n), 1.0, false, false);
        self.constraints.push(map.into_constraint(&format!("{name}_pd"), Sense::Positive));
        idx
    }

    fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    fn problem(self, id: &str, epsilon: f64, extraction: Option<Extraction>) -> LmiProblem {
        LmiProblem { id: id.into(), vars: self.vars, constraints: self.constraints, epsilon, extraction }
    }
}

struct MapBuilder {
    dim: usize,
    constant: Mat,
    terms: Vec<Term>,
}

impl MapBuilder {
    fn new(dim: usize) -> Self {
        MapBuilder { dim, constant: Mat::zeros(dim, dim), terms: Vec::new() }
    }

    /// `coeff · L V Lᵀ` for symmetric V.
    fn quad(&mut self, var: usize, l: &Mat, coeff: f64) {
        self.pair(var, l, &l.transpose(), coeff, false, false);
    }

    /// `coeff · L V R`, plus its transpose when `symmetrize`.
    fn pair(&mut self, var: usize, l: &Mat, r: &Mat, coeff: f64, symmetrize: bool, transpose_var: bool) {
        assert_eq!(l.rows(), self.dim, "term height");
        assert_eq!(r.cols(), self.dim, "term width");
        self.terms.push(Term {
            var,
            left: l.clone(),
            right: r.clone(),
            coeff,
            symmetrize,
            transpose_var,
        });
    }

    fn into_constraint(self, name: &str, sense: Sense) -> Constraint {
        Constraint { name: name.into(), dim: self.dim, sense, constant: self.constant, terms: self.terms }
    }
}

/// Wirtinger lower-bound block: `−coeff · (Γa R Γaᵀ + Γb R Γbᵀ)` with
/// `Γa = u − w` and `Γb = √3(u + w − 2·mid)`.
fn wirtinger_block(map: &mut MapBuilder, r_var: usize, u: &Mat, w: &Mat, mid: &Mat, coeff: f64) {
    let ga = u.sub_ref(w);
    let gb = u.add_ref(w).sub_ref(&mid.scale(2.0)).scale(SQRT3);
    map.quad(r_var, &ga, -coeff);
    map.quad(r_var, &gb, -coeff);
}

/// Gamma pair (Γa | Γb) used as a 2-column-block selector.
fn gamma(u: &Mat, w: &Mat, mid: &Mat) -> Mat {
    let ga = u.sub_ref(w);
    let gb = u.add_ref(w).sub_ref(&mid.scale(2.0)).scale(SQRT3);
    Mat::hstack(&[&ga, &gb])
}

/// Reciprocally convex coupling: `−coeff·Γ₂₃ Ξ(R̃,S) Γ₂₃ᵀ` expanded into
/// quadratic terms in R (four placements) plus the symmetric cross term in
/// S.
fn reciprocal_block(
    map: &mut MapBuilder,
    r_var: usize,
    s_var: usize,
    s_coeff_scale: f64,
    g2: &Mat,
    g3: &Mat,
    coeff: f64,
) {
    let n = g2.cols() / 2;
    let g2a = g2.block(0, 0, g2.rows(), n);
    let g2b = g2.block(0, n, g2.rows(), n);
    let g3a = g3.block(0, 0, g3.rows(), n);
    let g3b = g3.block(0, n, g3.rows(), n);
    map.quad(r_var, &g2a, -coeff);
    map.quad(r_var, &g2b, -coeff);
    map.quad(r_var, &g3a, -coeff);
    map.quad(r_var, &g3b, -coeff);
    map.pair(s_var, g2, &g3.transpose(), -coeff * s_coeff_scale, true, false);
}

/// The positive-definiteness map `Ξ(R̃,S) = [[R̃, S],[Sᵀ, R̃]]` with
/// `R̃ = diag(R, R)`, as terms on a 4n-dimensional constraint.
fn xi_map(map: &mut MapBuilder, r_var: usize, r_scale: f64, s_var: usize, s_scale: f64, n: usize) {
    let blocks = SelectorBasis::new(n, 4);
    for i in 1..=4 {
        map.quad(r_var, &blocks.v(i), r_scale);
    }
    let top = Mat::hstack(&[&blocks.v(1), &blocks.v(2)]);
    let bottom = Mat::hstack(&[&blocks.v(3), &blocks.v(4)]);
    map.pair(s_var, &top, &bottom.transpose(), s_scale, true, false);
}

/// Stability of `ė = N e + N_τ e(t−τ)` at a known constant delay
/// (quadratic Lyapunov–Krasovskii functional with a Wirtinger integral
/// bound and free-weighting matrices X, Y).
pub fn stability_constant(n_mat: &Mat, n_tau: &Mat, tau: f64) -> Result<LmiProblem, LmiError> {
    check_square_pair(n_mat, n_tau)?;
    if !(tau > 0.0) {
        return Err(LmiError::DelayOrder("tau > 0".into()));
    }
    let n = n_mat.rows();
    let b = SelectorBasis::new(n, 4);
    let mut bld = Builder::new();
    let p = bld.pd_var("P", 2 * n);
    let q = bld.pd_var("Q", n);
    let r = bld.pd_var("R", n);
    let x = bld.var("X", VarKind::General(n, n));
    let y = bld.var("Y", VarKind::General(n, n));

    let mut map = MapBuilder::new(b.dim());
    let pi1 = Mat::hstack(&[&b.v(1), &b.v(3).scale(tau)]);
    let pi2 = Mat::hstack(&[&b.v(4), &b.v(1).sub_ref(&b.v(2))]);
    map.pair(p, &pi1, &pi2.transpose(), 1.0, true, false);
    map.quad(q, &b.v(1), 1.0);
    map.quad(q, &b.v(2), -1.0);
    map.quad(r, &b.v(4), tau);
    wirtinger_block(&mut map, r, &b.v(1), &b.v(2), &b.v(3), 1.0 / tau);
    let script_n_t = Mat::hstack(&[n_mat, n_tau, &Mat::zeros(n, n), &Mat::identity(n).scale(-1.0)]);
    map.pair(x, &b.v(1), &script_n_t, 1.0, true, false);
    map.pair(y, &b.v(4), &script_n_t, 1.0, true, false);
    bld.push(map.into_constraint("lkf", Sense::Negative));

    Ok(bld.problem("stability_constant", epsilon_for(n_mat), None))
}

/// Stability over a delay interval `τ ∈ [τ_lo, τ_hi]` (8-block basis,
/// endpoint constraints, reciprocally convex coupling).
pub fn stability_interval(
    n_mat: &Mat,
    n_tau: &Mat,
    tau_lo: f64,
    tau_hi: f64,
) -> Result<LmiProblem, LmiError> {
    check_square_pair(n_mat, n_tau)?;
    check_interval(tau_lo, tau_hi)?;
    let n = n_mat.rows();
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let p = bld.pd_var("P", 4 * n);
    let q1 = bld.pd_var("Q1", n);
    let q2 = bld.pd_var("Q2", n);
    let q3 = bld.pd_var("Q3", n);
    let r1 = bld.pd_var("R1", n);
    let r2 = bld.pd_var("R2", n);
    let x = bld.var("X", VarKind::General(n, n));
    let y = bld.var("Y", VarKind::General(n, n));
    let s = bld.var("S", VarKind::General(2 * n, 2 * n));

    let script_n_t = Mat::hstack(&[
        n_mat,
        &Mat::zeros(n, n),
        n_tau,
        &Mat::zeros(n, 4 * n),
        &Mat::identity(n).scale(-1.0),
    ]);
    for (label, tau) in [("lkf_lo", tau_lo), ("lkf_hi", tau_hi)] {
        let mut map = MapBuilder::new(b.dim());
        theta1_terms(&mut map, &b, p, [q1, q2, q3], [r1, r2], s, tau, tau_lo, tau_hi);
        map.pair(x, &b.v(1), &script_n_t, 1.0, true, false);
        map.pair(y, &b.v(8), &script_n_t, 1.0, true, false);
        bld.push(map.into_constraint(label, Sense::Negative));
    }
    let mut xi = MapBuilder::new(4 * n);
    xi_map(&mut xi, r2, 1.0, s, 1.0, n);
    bld.push(xi.into_constraint("coupling", Sense::Positive));

    Ok(bld.problem("stability_interval", epsilon_for(n_mat), None))
}

/// Interval-delay terms shared by the interval-stability and interval-
/// synthesis conditions; evaluated at one endpoint `tau`.
#[allow(clippy::too_many_arguments)]
fn theta1_terms(
    map: &mut MapBuilder,
    b: &SelectorBasis,
    p: usize,
    q: [usize; 3],
    r: [usize; 2],
    s: usize,
    tau: f64,
    tau_lo: f64,
    tau_hi: f64,
) {
    let pi1 = Mat::hstack(&[
        &b.v(1),
        &b.v(5).scale(tau_lo),
        &b.v(6).scale(tau - tau_lo),
        &b.v(7).scale(tau_hi - tau),
    ]);
    let pi2 = Mat::hstack(&[
        &b.v(8),
        &b.v(1).sub_ref(&b.v(2)),
        &b.v(2).sub_ref(&b.v(3)),
        &b.v(3).sub_ref(&b.v(4)),
    ]);
    map.pair(p, &pi1, &pi2.transpose(), 1.0, true, false);
    map.quad(q[0], &b.v(1), 1.0);
    map.quad(q[0], &b.v(2), -1.0);
    map.quad(q[1], &b.v(2), 1.0);
    map.quad(q[1], &b.v(3), -1.0);
    map.quad(q[2], &b.v(3), 1.0);
    map.quad(q[2], &b.v(4), -1.0);
    map.quad(r[0], &b.v(8), tau_lo);
    map.quad(r[1], &b.v(8), tau_hi - tau_lo);
    wirtinger_block(map, r[0], &b.v(1), &b.v(2), &b.v(5), 1.0 / tau_lo);
    let g2 = gamma(&b.v(2), &b.v(3), &b.v(6));
    let g3 = gamma(&b.v(3), &b.v(4), &b.v(7));
    reciprocal_block(map, r[1], s, 1.0, &g2, &g3, 1.0 / (tau_hi - tau_lo));
}

/// Interval stability with convex parameter-dependent variables: every
/// functional matrix is an affine interpolation between endpoint variables,
/// and the interpolated storage blocks P(τ) share their off-diagonal and
/// trailing blocks.
pub fn stability_interval_pd(
    n_mat: &Mat,
    n_tau: &Mat,
    tau_lo: f64,
    tau_hi: f64,
) -> Result<LmiProblem, LmiError> {
    check_square_pair(n_mat, n_tau)?;
    check_interval(tau_lo, tau_hi)?;
    let n = n_mat.rows();
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let p11_1 = bld.var("P11_1", VarKind::Symmetric(2 * n));
    let p11_2 = bld.var("P11_2", VarKind::Symmetric(2 * n));
    let p12 = bld.var("P12", VarKind::General(2 * n, 2 * n));
    let p22 = bld.var("P22", VarKind::Symmetric(2 * n));
    let q: Vec<[usize; 2]> = (1..=3)
        .map(|i| {
            [
                bld.pd_var(&format!("Q{i}1"), n),
                bld.pd_var(&format!("Q{i}2"), n),
            ]
        })
        .collect();
    let r: Vec<[usize; 2]> = (1..=2)
        .map(|i| {
            [
                bld.pd_var(&format!("R{i}1"), n),
                bld.pd_var(&format!("R{i}2"), n),
            ]
        })
        .collect();
    let s1 = bld.var("S1", VarKind::General(2 * n, 2 * n));
    let s2 = bld.var("S2", VarKind::General(2 * n, 2 * n));
    let x1 = bld.var("X1", VarKind::General(n, n));
    let x2 = bld.var("X2", VarKind::General(n, n));
    let y1 = bld.var("Y1", VarKind::General(n, n));
    let y2 = bld.var("Y2", VarKind::General(n, n));

    // composed endpoint storage matrices must be positive definite
    let two_n = 2 * n;
    let u = SelectorBasis::new(two_n, 2);
    for (label, p11) in [("P1_pd", p11_1), ("P2_pd", p11_2)] {
        let mut map = MapBuilder::new(4 * n);
        map.quad(p11, &u.v(1), 1.0);
        map.pair(p12, &u.v(1), &u.v(2).transpose(), 1.0, true, false);
        map.quad(p22, &u.v(2), 1.0);
        bld.push(map.into_constraint(label, Sense::Positive));
    }

    let script_n_t = Mat::hstack(&[
        n_mat,
        &Mat::zeros(n, n),
        n_tau,
        &Mat::zeros(n, 4 * n),
        &Mat::identity(n).scale(-1.0),
    ]);
    let width = tau_hi - tau_lo;
    for (label, tau) in [("lkf_lo", tau_lo), ("lkf_hi", tau_hi)] {
        // interpolation weights of (P1, P2) at this endpoint
        let c1 = tau - tau_lo;
        let c2 = tau_hi - tau;
        let mut map = MapBuilder::new(b.dim());
        let pi1 = Mat::hstack(&[
            &b.v(1),
            &b.v(5).scale(tau_lo),
            &b.v(6).scale(tau - tau_lo),
            &b.v(7).scale(tau_hi - tau),
        ]);
        let pi2 = Mat::hstack(&[
            &b.v(8),
            &b.v(1).sub_ref(&b.v(2)),
            &b.v(2).sub_ref(&b.v(3)),
            &b.v(3).sub_ref(&b.v(4)),
        ]);
        // sym(Π1 P(τ) Π2ᵀ) with P(τ) = c1 P1 + c2 P2 expanded into the
        // shared-block structure
        let l_top = pi1.matmul(&u.v(1));
        let l_bot = pi1.matmul(&u.v(2));
        let r_top = u.v(1).transpose().matmul(&pi2.transpose());
        let r_bot = u.v(2).transpose().matmul(&pi2.transpose());
        map.pair(p11_1, &l_top, &r_top, c1, true, false);
        map.pair(p11_2, &l_top, &r_top, c2, true, false);
        map.pair(p12, &l_top, &r_bot, c1 + c2, true, false);
        map.pair(p12, &l_bot, &r_top, c1 + c2, true, true);
        map.pair(p22, &l_bot, &r_bot, c1 + c2, true, false);

        for (qi, pair) in q.iter().enumerate() {
            let (pos, neg) = match qi {
                0 => (b.v(1), b.v(2)),
                1 => (b.v(2), b.v(3)),
                _ => (b.v(3), b.v(4)),
            };
            for (kv, c) in [(pair[0], c1), (pair[1], c2)] {
                map.quad(kv, &pos, c);
                map.quad(kv, &neg, -c);
            }
        }
        for (kv, c) in [(r[0][0], c1), (r[0][1], c2)] {
            map.quad(kv, &b.v(8), tau_lo * c);
            wirtinger_block(&mut map, kv, &b.v(1), &b.v(2), &b.v(5), c / tau_lo);
        }
        let g2 = gamma(&b.v(2), &b.v(3), &b.v(6));
        let g3 = gamma(&b.v(3), &b.v(4), &b.v(7));
        for (kv, sv, c) in [(r[1][0], s1, c1), (r[1][1], s2, c2)] {
            map.quad(kv, &b.v(8), width * c);
            reciprocal_block(&mut map, kv, sv, 1.0, &g2, &g3, c / width);
        }
        for (kv, c) in [(x1, c1), (x2, c2)] {
            map.pair(kv, &b.v(1), &script_n_t, c, true, false);
        }
        for (kv, c) in [(y1, c1), (y2, c2)] {
            map.pair(kv, &b.v(8), &script_n_t, c, true, false);
        }
        bld.push(map.into_constraint(label, Sense::Negative));

        let mut xi = MapBuilder::new(4 * n);
        xi_map(&mut xi, r[1][0], c1, s1, c1, n);
        xi_map(&mut xi, r[1][1], c2, s2, c2, n);
        bld.push(xi.into_constraint(&format!("coupling_{label}"), Sense::Positive));
    }

    Ok(bld.problem("stability_interval_pd", epsilon_for(n_mat), None))
}

/// Stability of `ė = Ne + N₁e(t−τ₁) + N₂e(t−τ₂) + N₃e(t−τ₃)` with
/// `0 < τ₁ < τ₂ < τ₃` (also hosts the delay-partitioned single- and
/// two-delay reductions).
pub fn stability_multi(
    n_mat: &Mat,
    delayed: [&Mat; 3],
    taus: [f64; 3],
) -> Result<LmiProblem, LmiError> {
    for d in delayed {
        check_square_pair(n_mat, d)?;
    }
    check_three(taus)?;
    let n = n_mat.rows();
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let p = bld.pd_var("P", 4 * n);
    let q1 = bld.pd_var("Q1", n);
    let q2 = bld.pd_var("Q2", n);
    let q3 = bld.pd_var("Q3", n);
    let r1 = bld.pd_var("R1", n);
    let r2 = bld.pd_var("R2", n);
    let r3 = bld.pd_var("R3", n);
    let x = bld.var("X", VarKind::General(n, n));
    let y = bld.var("Y", VarKind::General(n, n));

    let mut map = MapBuilder::new(b.dim());
    theta3_terms(&mut map, &b, p, [q1, q2, q3], [r1, r2, r3], taus);
    let script_n_t = Mat::hstack(&[
        n_mat,
        delayed[0],
        delayed[1],
        delayed[2],
        &Mat::zeros(n, 3 * n),
        &Mat::identity(n).scale(-1.0),
    ]);
    map.pair(x, &b.v(1), &script_n_t, 1.0, true, false);
    map.pair(y, &b.v(8), &script_n_t, 1.0, true, false);
    bld.push(map.into_constraint("lkf", Sense::Negative));

    Ok(bld.problem("stability_multi", epsilon_for(n_mat), None))
}

/// The three-delay functional terms shared by the partitioned stability and
/// all constant-delay stabilization conditions.
fn theta3_terms(
    map: &mut MapBuilder,
    b: &SelectorBasis,
    p: usize,
    q: [usize; 3],
    r: [usize; 3],
    taus: [f64; 3],
) {
    let [t1, t2, t3] = taus;
    let pi1 = Mat::hstack(&[
        &b.v(1),
        &b.v(5).scale(t1),
        &b.v(6).scale(t2 - t1),
        &b.v(7).scale(t3 - t2),
    ]);
    let pi2 = Mat::hstack(&[
        &b.v(8),
        &b.v(1).sub_ref(&b.v(2)),
        &b.v(2).sub_ref(&b.v(3)),
        &b.v(3).sub_ref(&b.v(4)),
    ]);
    map.pair(p, &pi1, &pi2.transpose(), 1.0, true, false);
    map.quad(q[0], &b.v(1), 1.0);
    map.quad(q[0], &b.v(2), -1.0);
    map.quad(q[1], &b.v(2), 1.0);
    map.quad(q[1], &b.v(3), -1.0);
    map.quad(q[2], &b.v(3), 1.0);
    map.quad(q[2], &b.v(4), -1.0);
    map.quad(r[0], &b.v(8), t1);
    map.quad(r[1], &b.v(8), t2 - t1);
    map.quad(r[2], &b.v(8), t3 - t2);
    wirtinger_block(map, r[0], &b.v(1), &b.v(2), &b.v(5), 1.0 / t1);
    wirtinger_block(map, r[1], &b.v(2), &b.v(3), &b.v(6), 1.0 / (t2 - t1));
    wirtinger_block(map, r[2], &b.v(3), &b.v(4), &b.v(7), 1.0 / (t3 - t2));
}

fn synth_vars(bld: &mut Builder, n: usize, g_cols: &[(String, usize)]) -> (usize, [usize; 3], [usize; 3], usize, Vec<usize>) {
    let p = bld.pd_var("P", 4 * n);
    let q = [bld.pd_var("Q1", n), bld.pd_var("Q2", n), bld.pd_var("Q3", n)];
    let r = [bld.pd_var("R1", n), bld.pd_var("R2", n), bld.pd_var("R3", n)];
    let x = bld.var("X", VarKind::General(n, n));
    let gs = g_cols
        .iter()
        .map(|(name, cols)| bld.var(name, VarKind::General(n, *cols)))
        .collect();
    (p, q, r, x, gs)
}

/// Find a delayed gain `N_τ = X⁻¹G` stabilizing `ė = Ne + N_τe(t−τ)` at a
/// known delay; the delay is internally partitioned at τ/3 and 2τ/3 and λ
/// is a fixed free-weighting scalar.
pub fn synth_constant(n_mat: &Mat, tau: f64, lambda: f64) -> Result<LmiProblem, LmiError> {
    if !(tau > 0.0) {
        return Err(LmiError::DelayOrder("tau > 0".into()));
    }
    let n = check_square(n_mat)?;
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let (p, q, r, x, gs) = synth_vars(&mut bld, n, &[("G".into(), n)]);
    let mut map = MapBuilder::new(b.dim());
    theta3_terms(&mut map, &b, p, q, r, [tau / 3.0, 2.0 * tau / 3.0, tau]);
    let lhs = b.v(1).add_ref(&b.v(8).scale(lambda));
    let script_n1 = script_row(n, &[(0, n_mat)], true);
    let script_n2 = script_row_identity(n, 3);
    map.pair(x, &lhs, &script_n1, 1.0, true, false);
    map.pair(gs[0], &lhs, &script_n2, 1.0, true, false);
    bld.push(map.into_constraint("lkf", Sense::Negative));

    let extraction = Extraction { x_var: x, gains: vec![("N_tau".into(), gs[0])] };
    Ok(bld.problem("synth_constant", epsilon_for(n_mat), Some(extraction)))
}

/// 8-block row with the given blocks placed at their positions and `−I` at
/// the last block when `with_minus_i`.
fn script_row(n: usize, placed: &[(usize, &Mat)], with_minus_i: bool) -> Mat {
    let height = placed.first().map(|(_, m)| m.rows()).unwrap_or(n);
    let mut out = Mat::zeros(height, 8 * n);
    for (block, m) in placed {
        out.set_block(0, block * n, m);
    }
    if with_minus_i {
        out.set_block(0, 7 * n, &Mat::identity(n).scale(-1.0));
    }
    out
}

/// 8-block row with `I_n` at the given block index.
fn script_row_identity(n: usize, block: usize) -> Mat {
    let mut out = Mat::zeros(n, 8 * n);
    out.set_block(0, block * n, &Mat::identity(n));
    out
}

/// Find `N_τ = X⁻¹G` stabilizing over a delay interval.
pub fn synth_interval(
    n_mat: &Mat,
    tau_lo: f64,
    tau_hi: f64,
    lambda: f64,
) -> Result<LmiProblem, LmiError> {
    check_interval(tau_lo, tau_hi)?;
    let n = check_square(n_mat)?;
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let p = bld.pd_var("P", 4 * n);
    let q = [bld.pd_var("Q1", n), bld.pd_var("Q2", n), bld.pd_var("Q3", n)];
    let r = [bld.pd_var("R1", n), bld.pd_var("R2", n)];
    let x = bld.var("X", VarKind::General(n, n));
    let g = bld.var("G", VarKind::General(n, n));
    let s = bld.var("S", VarKind::General(2 * n, 2 * n));

    let lhs = b.v(1).add_ref(&b.v(8).scale(lambda));
    let script_n1 = script_row(n, &[(0, n_mat)], true);
    let script_n2 = script_row_identity(n, 2);
    for (label, tau) in [("lkf_lo", tau_lo), ("lkf_hi", tau_hi)] {
        let mut map = MapBuilder::new(b.dim());
        theta1_terms(&mut map, &b, p, q, r, s, tau, tau_lo, tau_hi);
        map.pair(x, &lhs, &script_n1, 1.0, true, false);
        map.pair(g, &lhs, &script_n2, 1.0, true, false);
        bld.push(map.into_constraint(label, Sense::Negative));
    }
    let mut xi = MapBuilder::new(4 * n);
    xi_map(&mut xi, r[1], 1.0, s, 1.0, n);
    bld.push(xi.into_constraint("coupling", Sense::Positive));

    let extraction = Extraction { x_var: x, gains: vec![("N_tau".into(), g)] };
    Ok(bld.problem("synth_interval", epsilon_for(n_mat), Some(extraction)))
}

/// Structured stabilization at a constant delay: the dynamics are
/// `N = N₀₁ + Z N₀₂`, `N_τ = N_τ₁ + Z N_τ₂` and `Z = X⁻¹G` is recovered on
/// feasibility.
pub fn synth_structured_constant(
    n01: &Mat,
    n02: &Mat,
    ntau1: &Mat,
    ntau2: &Mat,
    tau: f64,
    lambda: f64,
) -> Result<LmiProblem, LmiError> {
    if !(tau > 0.0) {
        return Err(LmiError::DelayOrder("tau > 0".into()));
    }
    let n = check_square(n01)?;
    let m = check_structured(n, n01, n02, ntau1, ntau2)?;
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let (p, q, r, x, gs) = synth_vars(&mut bld, n, &[("G".into(), m)]);
    let mut map = MapBuilder::new(b.dim());
    theta3_terms(&mut map, &b, p, q, r, [tau / 3.0, 2.0 * tau / 3.0, tau]);
    let lhs = b.v(1).add_ref(&b.v(8).scale(lambda));
    let script_n1 = script_row(n, &[(0, n01), (3, ntau1)], true);
    let script_n2 = script_row(n, &[(0, n02), (3, ntau2)], false);
    map.pair(x, &lhs, &script_n1, 1.0, true, false);
    map.pair(gs[0], &lhs, &script_n2, 1.0, true, false);
    bld.push(map.into_constraint("lkf", Sense::Negative));

    let extraction = Extraction { x_var: x, gains: vec![("Z".into(), gs[0])] };
    Ok(bld.problem("synth_structured_constant", epsilon_for(n01), Some(extraction)))
}

/// Structured stabilization over a delay interval.
pub fn synth_structured_interval(
    n01: &Mat,
    n02: &Mat,
    ntau1: &Mat,
    ntau2: &Mat,
    tau_lo: f64,
    tau_hi: f64,
    lambda: f64,
) -> Result<LmiProblem, LmiError> {
    check_interval(tau_lo, tau_hi)?;
    let n = check_square(n01)?;
    let m = check_structured(n, n01, n02, ntau1, ntau2)?;
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let p = bld.pd_var("P", 4 * n);
    let q = [bld.pd_var("Q1", n), bld.pd_var("Q2", n), bld.pd_var("Q3", n)];
    let r = [bld.pd_var("R1", n), bld.pd_var("R2", n)];
    let x = bld.var("X", VarKind::General(n, n));
    let g = bld.var("G", VarKind::General(n, m));
    let s = bld.var("S", VarKind::General(2 * n, 2 * n));

    let lhs = b.v(1).add_ref(&b.v(8).scale(lambda));
    let script_n1 = script_row(n, &[(0, n01), (2, ntau1)], true);
    let script_n2 = script_row(n, &[(0, n02), (2, ntau2)], false);
    for (label, tau) in [("lkf_lo", tau_lo), ("lkf_hi", tau_hi)] {
        let mut map = MapBuilder::new(b.dim());
        theta1_terms(&mut map, &b, p, q, r, s, tau, tau_lo, tau_hi);
        map.pair(x, &lhs, &script_n1, 1.0, true, false);
        map.pair(g, &lhs, &script_n2, 1.0, true, false);
        bld.push(map.into_constraint(label, Sense::Negative));
    }
    let mut xi = MapBuilder::new(4 * n);
    xi_map(&mut xi, r[1], 1.0, s, 1.0, n);
    bld.push(xi.into_constraint("coupling", Sense::Positive));

    let extraction = Extraction { x_var: x, gains: vec![("Z".into(), g)] };
    Ok(bld.problem("synth_structured_interval", epsilon_for(n01), Some(extraction)))
}

/// Two-delay structured stabilization (`0 < τ < h`, partitioned at τ/2):
/// gains `Z₀, Z_τ, Z_h = X⁻¹G·` act through the given structure rows.
#[allow(clippy::too_many_arguments)]
pub fn synth_two_delay(
    n01: &Mat,
    n02: &Mat,
    ntau1: &Mat,
    ntau2: &Mat,
    nh1: &Mat,
    nh2: &Mat,
    tau: f64,
    h: f64,
    lambda: f64,
) -> Result<LmiProblem, LmiError> {
    if !(tau > 0.0 && h > tau) {
        return Err(LmiError::DelayOrder("0 < tau < h".into()));
    }
    let n = check_square(n01)?;
    let m = check_structured(n, n01, n02, ntau1, ntau2)?;
    let m2 = check_structured(n, n01, n02, nh1, nh2)?;
    if m2 != m {
        return Err(LmiError::Dimension("structure row counts must agree".into()));
    }
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let (p, q, r, x, gs) = synth_vars(
        &mut bld,
        n,
        &[("G0".into(), m), ("G_tau".into(), m), ("G_h".into(), m)],
    );
    let mut map = MapBuilder::new(b.dim());
    theta3_terms(&mut map, &b, p, q, r, [tau / 2.0, tau, h]);
    let lhs = b.v(1).add_ref(&b.v(8).scale(lambda));
    let script_n1 = script_row(n, &[(0, n01), (2, ntau1), (3, nh1)], true);
    map.pair(x, &lhs, &script_n1, 1.0, true, false);
    map.pair(gs[0], &lhs, &script_row(n, &[(0, n02)], false), 1.0, true, false);
    map.pair(gs[1], &lhs, &script_row(n, &[(2, ntau2)], false), 1.0, true, false);
    map.pair(gs[2], &lhs, &script_row(n, &[(3, nh2)], false), 1.0, true, false);
    bld.push(map.into_constraint("lkf", Sense::Negative));

    let extraction = Extraction {
        x_var: x,
        gains: vec![("Z0".into(), gs[0]), ("Z_tau".into(), gs[1]), ("Z_h".into(), gs[2])],
    };
    Ok(bld.problem("synth_two_delay", epsilon_for(n01), Some(extraction)))
}

/// Data for one delayed channel of the three-delay stabilization problem.
#[derive(Debug, Clone)]
pub struct StructuredChannel {
    /// Fixed n×n part.
    pub fixed: Mat,
    /// Structure rows the gain acts through (m×n).
    pub structured: Mat,
}

/// Three-delay structured stabilization at `0 < τ₁ < τ₂ < τ₃`; gains
/// `Z₀…Z₃ = X⁻¹G·`.
pub fn synth_three_delay(
    base: &StructuredChannel,
    channels: [&StructuredChannel; 3],
    taus: [f64; 3],
    lambda: f64,
) -> Result<LmiProblem, LmiError> {
    check_three(taus)?;
    let n = check_square(&base.fixed)?;
    let m = base.structured.rows();
    for ch in channels.iter().copied().chain(std::iter::once(base)) {
        if ch.fixed.rows() != n || ch.fixed.cols() != n {
            return Err(LmiError::Dimension("fixed part must be n x n".into()));
        }
        if ch.structured.rows() != m || ch.structured.cols() != n {
            return Err(LmiError::Dimension("structure rows must be m x n".into()));
        }
    }
    let b = SelectorBasis::new(n, 8);
    let mut bld = Builder::new();
    let (p, q, r, x, gs) = synth_vars(
        &mut bld,
        n,
        &[
            ("G0".into(), m),
            ("G1".into(), m),
            ("G2".into(), m),
            ("G3".into(), m),
        ],
    );
    let mut map = MapBuilder::new(b.dim());
    theta3_terms(&mut map, &b, p, q, r, taus);
    let lhs = b.v(1).add_ref(&b.v(8).scale(lambda));
    let script_n1 = script_row(
        n,
        &[
            (0, &base.fixed),
            (1, &channels[0].fixed),
            (2, &channels[1].fixed),
            (3, &channels[2].fixed),
        ],
        true,
    );
    map.pair(x, &lhs, &script_n1, 1.0, true, false);
    for (i, g) in gs.iter().enumerate() {
        let structured = if i == 0 { &base.structured } else { &channels[i - 1].structured };
        map.pair(*g, &lhs, &script_row(n, &[(i, structured)], false), 1.0, true, false);
    }
    bld.push(map.into_constraint("lkf", Sense::Negative));

    let extraction = Extraction {
        x_var: x,
        gains: vec![
            ("Z0".into(), gs[0]),
            ("Z1".into(), gs[1]),
            ("Z2".into(), gs[2]),
            ("Z3".into(), gs[3]),
        ],
    };
    Ok(bld.problem("synth_three_delay", epsilon_for(&base.fixed), Some(extraction)))
}

fn check_square(m: &Mat) -> Result<usize, LmiError> {
    if !m.is_square() {
        return Err(LmiError::Dimension(format!(
            "system matrix must be square, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.rows())
}

fn check_square_pair(a: &Mat, b: &Mat) -> Result<(), LmiError> {
    let n = check_square(a)?;
    if b.rows() != n || b.cols() != n {
        return Err(LmiError::Dimension("delayed matrix must match the state size".into()));
    }
    Ok(())
}

fn check_interval(lo: f64, hi: f64) -> Result<(), LmiError> {
    if !(lo > 0.0 && hi > lo) {
        return Err(LmiError::DelayOrder("0 < tau_lo < tau_hi".into()));
    }
    Ok(())
}

fn check_three(taus: [f64; 3]) -> Result<(), LmiError> {
    if !(taus[0] > 0.0 && taus[1] > taus[0] && taus[2] > taus[1]) {
        return Err(LmiError::DelayOrder("0 < tau1 < tau2 < tau3".into()));
    }
    Ok(())
}

fn check_structured(
    n: usize,
    n01: &Mat,
    n02: &Mat,
    ntau1: &Mat,
    ntau2: &Mat,
) -> Result<usize, LmiError> {
    let _ = n01;
    if ntau1.rows() != n || ntau1.cols() != n {
        return Err(LmiError::Dimension("fixed part must be n x n".into()));
    }
    if n02.cols() != n || ntau2.cols() != n {
        return Err(LmiError::Dimension("structure rows must have n columns".into()));
    }
    if n02.rows() != ntau2.rows() {
        return Err(LmiError::Dimension("structure row counts must agree".into()));
    }
    Ok(n02.rows())
}

#[cfg(test)]
mod builder_tests {
    use super::*;

    #[test]
    fn interval_ordering_is_enforced() {
        let n = Mat::identity(2);
        assert!(matches!(
            stability_interval(&n, &n, 1.5, 1.5),
            Err(LmiError::DelayOrder(_))
        ));
        assert!(matches!(
            synth_interval(&n, 2.0, 1.0, 0.5),
            Err(LmiError::DelayOrder(_))
        ));
        assert!(matches!(
            stability_multi(&n, [&n, &n, &n], [0.5, 0.5, 1.0]),
            Err(LmiError::DelayOrder(_))
        ));
        assert!(matches!(
            synth_two_delay(&n, &n, &n, &n, &n, &n, 1.0, 0.8, 0.5),
            Err(LmiError::DelayOrder(_))
        ));
    }

    #[test]
    fn constraint_dimensions_match_the_block_count() {
        let n = Mat::identity(2);
        let p = stability_constant(&n, &n, 1.0).unwrap();
        // 4-block basis over a 2-state system: one 8x8 functional
        // constraint plus the three positive-definiteness constraints
        let lkf = p.constraints.iter().find(|c| c.name == "lkf").unwrap();
        assert_eq!(lkf.dim, 8);
        assert_eq!(p.vars.iter().find(|v| v.name == "P").unwrap().kind.shape(), (4, 4));
        let p8 = stability_interval(&n, &n, 0.5, 1.0).unwrap();
        let lkf = p8.constraints.iter().find(|c| c.name == "lkf_lo").unwrap();
        assert_eq!(lkf.dim, 16);
    }

    #[test]
    fn dump_lists_variables_and_terms() {
        let p = stability_constant(&Mat::identity(1), &Mat::identity(1), 1.0).unwrap();
        let dump = p.dump();
        assert!(dump.contains("problem stability_constant"));
        assert!(dump.contains("var P symmetric_pd 2 2"));
        assert!(dump.contains("constraint lkf negative dim 4"));
    }
}
