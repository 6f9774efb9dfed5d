//! Primal-dual interior-point engine for the block-diagonal feasibility
//! problems produced by the LMI builders.
//!
//! Feasibility of `C_j(x) ≺ −εI` (after sign normalization) is decided via
//! the phase-I embedding `min t subject to B_j(x) ⪯ t·I`: the feasible set
//! of an LMI family is a cone, so strict feasibility is equivalent to the
//! phase-I value being negative, and the iteration is stopped early the
//! moment the current `x` passes an independent eigenvalue recheck of every
//! constraint. The engine never certifies from its own internals.

use crate::linalg::{cholesky, cholesky_solve, sym_eig, sym_eig_min, Mat};
use crate::lmi::{LmiProblem, Sense};

/// Scalarized constraint block, normalized so feasibility means
/// `K + Σ x_k A_k ⪯ −εI` became `B(x) ⪯ 0` with ε folded into `K`.
pub(crate) struct BlockData {
    pub dim: usize,
    pub constant: Mat,
    /// Sparse list of (scalar index, symmetric coefficient matrix).
    pub coeffs: Vec<(usize, Mat)>,
}

pub(crate) struct Scalarized {
    pub blocks: Vec<BlockData>,
    pub num_scalars: usize,
    pub var_offsets: Vec<usize>,
}

/// Outer product accumulation `out += s · col ⊗ row`.
fn outer_acc(out: &mut Mat, s: f64, col: &[f64], row: &[f64]) {
    for (i, &ci) in col.iter().enumerate() {
        if ci == 0.0 {
            continue;
        }
        for (j, &rj) in row.iter().enumerate() {
            out[(i, j)] += s * ci * rj;
        }
    }
}

pub(crate) fn scalarize(problem: &LmiProblem) -> Scalarized {
    let mut var_offsets = Vec::with_capacity(problem.vars.len());
    let mut num = 0usize;
    for v in &problem.vars {
        var_offsets.push(num);
        num += v.kind.scalar_count();
    }

    let mut blocks = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        let sign = match c.sense {
            Sense::Negative => 1.0,
            Sense::Positive => -1.0,
        };
        let mut constant = c.constant.scale(sign);
        for i in 0..c.dim {
            constant[(i, i)] += problem.epsilon;
        }
        let mut acc: Vec<Option<Mat>> = vec![None; num];
        for t in &c.terms {
            let kind = problem.vars[t.var].kind;
            let off = var_offsets[t.var];
            let lt = &t.left;
            let rt = &t.right;
            let l_cols: Vec<Vec<f64>> = (0..lt.cols())
                .map(|j| (0..lt.rows()).map(|i| lt[(i, j)]).collect())
                .collect();
            for k in 0..kind.scalar_count() {
                let (ei, ej) = kind.entry(k);
                let slot = acc[off + k].get_or_insert_with(|| Mat::zeros(c.dim, c.dim));
                let s = sign * t.coeff;
                // basis matrix contribution(s) of this scalar
                let mut pairs: Vec<(usize, usize)> = vec![(ei, ej)];
                if kind.is_symmetric() && ei != ej {
                    pairs.push((ej, ei));
                }
                for (bi, bj) in pairs {
                    let (li, rj) = if t.transpose_var { (bj, bi) } else { (bi, bj) };
                    outer_acc(slot, s, &l_cols[li], rt.row(rj));
                    if t.symmetrize {
                        // transpose of s·(L colᵢ)(R rowⱼ) is the swapped outer
                        outer_acc(slot, s, rt.row(rj), &l_cols[li]);
                    }
                }
            }
        }
        let mut coeffs = Vec::new();
        for (k, slot) in acc.into_iter().enumerate() {
            if let Some(a) = slot {
                // constraint maps are symmetric by construction; enforce it
                // exactly so the cone iteration sees clean data
                let a = a.symmetrize();
                if a.norm_max() > 0.0 {
                    coeffs.push((k, a));
                }
            }
        }
        blocks.push(BlockData { dim: c.dim, constant, coeffs });
    }
    Scalarized { blocks, num_scalars: num, var_offsets }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase1Status {
    /// The assignment passed the independent certification.
    CertFeasible,
    /// Weak duality proved the phase-I optimum positive: no certificate
    /// exists at this strictness margin.
    InfeasibleBound,
    /// Embedding converged without a certificate.
    Converged,
    /// Progress stalled before convergence.
    Stalled,
    /// Iteration budget exhausted.
    Budget,
}

pub(crate) struct IpmOutcome {
    /// Scalarized assignment (without the phase-I variable).
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final phase-I objective `t`.
    pub t: f64,
    pub status: Phase1Status,
}

/// Certification callback: given the scalar assignment, report the minimum
/// constraint margin (positive = strictly inside).
pub(crate) type CertFn<'a> = dyn Fn(&[f64]) -> f64 + 'a;

/// Run the phase-I interior-point iteration. Stops as soon as `cert`
/// reports a margin of at least `target_margin`, or on convergence of the
/// embedding, or when the iteration budget is exhausted.
pub(crate) fn phase1(
    s: &Scalarized,
    max_iterations: usize,
    tolerance: f64,
    cert: &CertFn,
    target_margin: f64,
) -> IpmOutcome {
    let m = s.num_scalars + 1; // + phase-I variable t
    let t_idx = s.num_scalars;
    let nblocks = s.blocks.len();
    let total_dim: usize = s.blocks.iter().map(|b| b.dim).sum();

    // dual-form data: C_j = −K_j, A_{t,j} = −I; b = −e_t
    let c_mats: Vec<Mat> = s.blocks.iter().map(|b| b.constant.scale(-1.0)).collect();
    let mut b_vec = vec![0.0; m];
    b_vec[t_idx] = -1.0;

    let data_scale: f64 = s
        .blocks
        .iter()
        .map(|b| {
            b.constant
                .norm_fro()
                .max(b.coeffs.iter().fold(0.0f64, |mx, (_, a)| mx.max(a.norm_fro())))
        })
        .fold(1.0, f64::max);

    let mut x_blocks: Vec<Mat> = s
        .blocks
        .iter()
        .map(|b| Mat::identity(b.dim).scale(1.0 / total_dim as f64))
        .collect();
    let mut z_blocks: Vec<Mat> = s.blocks.iter().map(|b| Mat::identity(b.dim).scale(data_scale)).collect();
    let mut y = vec![0.0; m];
    y[t_idx] = data_scale;

    let mut stall: usize = 0;
    let mut best_t = f64::INFINITY;
    for iter in 0..max_iterations {
        // certification early exit (evaluates the original maps); gated on
        // the phase-I objective being small enough that a pass is possible
        if y[t_idx] <= (10.0 * target_margin).max(1e-3 * data_scale) {
            let margin = cert(&y[..s.num_scalars]);
            if margin >= target_margin {
                return IpmOutcome {
                    x: y[..s.num_scalars].to_vec(),
                    iterations: iter,
                    t: y[t_idx],
                    status: Phase1Status::CertFeasible,
                };
            }
        }

        let mu = x_blocks
            .iter()
            .zip(&z_blocks)
            .map(|(x, z)| x.dot(z))
            .sum::<f64>()
            / total_dim as f64;

        // residuals
        let mut rp = b_vec.clone();
        for (j, b) in s.blocks.iter().enumerate() {
            for (k, a) in &b.coeffs {
                rp[*k] -= a.dot(&x_blocks[j]);
            }
            rp[t_idx] += x_blocks[j].trace(); // −⟨−I, X⟩
        }
        let rd: Vec<Mat> = (0..nblocks)
            .map(|j| {
                let mut r = c_mats[j].clone();
                for (k, a) in &s.blocks[j].coeffs {
                    r = r.axpy(-y[*k], a);
                }
                // t term: −y_t·(−I)
                for i in 0..s.blocks[j].dim {
                    r[(i, i)] += y[t_idx];
                }
                r.sub_ref(&z_blocks[j])
            })
            .collect();

        let rp_norm = rp.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rd_norm = rd.iter().map(|r| r.norm_fro()).fold(0.0, f64::max);
        let scale = 1.0 + data_scale;

        // weak duality: a primal-feasible point bounds the phase-I optimum
        // below, and a bound above the certification target rules out any
        // certificate; demand tight primal feasibility so the residual
        // correction cannot flip the sign
        let obj_primal: f64 = c_mats.iter().zip(&x_blocks).map(|(c, x)| c.dot(x)).sum();
        if rp_norm < 1e-9 * scale && -obj_primal > 2.0 * target_margin {
            return IpmOutcome {
                x: y[..s.num_scalars].to_vec(),
                iterations: iter,
                t: y[t_idx],
                status: Phase1Status::InfeasibleBound,
            };
        }

        if mu < tolerance * scale && rp_norm < tolerance * scale && rd_norm < tolerance * scale {
            return IpmOutcome {
                x: y[..s.num_scalars].to_vec(),
                iterations: iter,
                t: y[t_idx],
                status: Phase1Status::Converged,
            };
        }

        // stall detection on the phase-I objective
        if y[t_idx] < best_t - 1e-9 * (1.0 + y[t_idx].abs()) {
            best_t = y[t_idx];
            stall = 0;
        } else {
            stall += 1;
            if stall >= 12 {
                return IpmOutcome {
                    x: y[..s.num_scalars].to_vec(),
                    iterations: iter,
                    t: y[t_idx],
                    status: Phase1Status::Stalled,
                };
            }
        }

        // factorizations of the current iterates
        let z_inv: Vec<Mat> = match z_blocks
            .iter()
            .map(|z| cholesky(z).map(|l| chol_inverse(&l)))
            .collect::<Option<Vec<_>>>()
        {
            Some(v) => v,
            None => break,
        };

        // Schur complement M_ki = Σ_j ⟨A_kj, X_j A_ij Z_j⁻¹⟩ over the
        // sparse per-block variable lists (the phase-I column is dense).
        let mut schur = Mat::zeros(m, m);
        for (j, b) in s.blocks.iter().enumerate() {
            let neg_i = neg_identity(b.dim);
            let mut us: Vec<(usize, Mat)> = Vec::with_capacity(b.coeffs.len() + 1);
            for (k, a) in &b.coeffs {
                us.push((*k, x_blocks[j].matmul(a).matmul(&z_inv[j])));
            }
            // A_t = −I: U_t = −X Z⁻¹
            us.push((t_idx, x_blocks[j].matmul(&z_inv[j]).scale(-1.0)));
            let a_list: Vec<(usize, &Mat)> = b
                .coeffs
                .iter()
                .map(|(k, a)| (*k, a))
                .chain(std::iter::once((t_idx, &neg_i)))
                .collect();
            for (k, a) in &a_list {
                for (i, u) in &us {
                    if *i <= *k {
                        let v = a.dot(u);
                        schur[(*k, *i)] += v;
                        if *i != *k {
                            schur[(*i, *k)] += v;
                        }
                    }
                }
            }
        }
        // mild ridge for numerical safety
        let ridge = 1e-13 * (1.0 + schur.norm_max());
        for i in 0..m {
            schur[(i, i)] += ridge;
        }
        let schur_l = match cholesky(&schur) {
            Some(l) => l,
            None => break,
        };

        let solve_direction = |sigma_mu: f64, extra: Option<&Vec<Mat>>| -> (Vec<f64>, Vec<Mat>, Vec<Mat>) {
            // rhs_k = rp_k − Σ_j ⟨A_kj, σμZ⁻¹ − X − X Rd Z⁻¹ [− ΔXΔZ Z⁻¹]⟩
            let inner: Vec<Mat> = (0..nblocks)
                .map(|j| {
                    let mut w = z_inv[j].scale(sigma_mu);
                    w = w.sub_ref(&x_blocks[j]);
                    w = w.sub_ref(&x_blocks[j].matmul(&rd[j]).matmul(&z_inv[j]));
                    if let Some(e) = extra {
                        w = w.sub_ref(&e[j].matmul(&z_inv[j]));
                    }
                    w
                })
                .collect();
            let mut rhs = rp.clone();
            for (j, b) in s.blocks.iter().enumerate() {
                for (k, a) in &b.coeffs {
                    rhs[*k] -= a.dot(&inner[j]);
                }
                rhs[t_idx] += inner[j].trace();
            }
            let dy = cholesky_solve(&schur_l, &rhs);
            let dz: Vec<Mat> = (0..nblocks)
                .map(|j| {
                    let mut d = rd[j].clone();
                    for (k, a) in &s.blocks[j].coeffs {
                        d = d.axpy(-dy[*k], a);
                    }
                    for i in 0..s.blocks[j].dim {
                        d[(i, i)] += dy[t_idx];
                    }
                    d
                })
                .collect();
            let dx: Vec<Mat> = (0..nblocks)
                .map(|j| {
                    let mut d = z_inv[j].scale(sigma_mu);
                    d = d.sub_ref(&x_blocks[j]);
                    d = d.sub_ref(&x_blocks[j].matmul(&dz[j]).matmul(&z_inv[j]));
                    if let Some(e) = extra {
                        d = d.sub_ref(&e[j].matmul(&z_inv[j]));
                    }
                    d.symmetrize()
                })
                .collect();
            (dy, dx, dz)
        };

        // predictor
        let (_dy_aff, dx_aff, dz_aff) = solve_direction(0.0, None);
        let ap_aff = max_step(&x_blocks, &dx_aff);
        let ad_aff = max_step(&z_blocks, &dz_aff);
        let mu_aff = x_blocks
            .iter()
            .zip(&dx_aff)
            .zip(z_blocks.iter().zip(&dz_aff))
            .map(|((x, dx), (z, dz))| {
                x.axpy(ap_aff, dx).dot(&z.axpy(ad_aff, dz))
            })
            .sum::<f64>()
            / total_dim as f64;
        let sigma = ((mu_aff / mu).powi(3)).clamp(0.0, 1.0);

        // corrector
        let extra: Vec<Mat> = dx_aff
            .iter()
            .zip(&dz_aff)
            .map(|(dx, dz)| dx.matmul(dz))
            .collect();
        let (dy, dx, dz) = solve_direction(sigma * mu, Some(&extra));
        let gamma = 0.95;
        let ap = (gamma * max_step(&x_blocks, &dx)).min(1.0);
        let ad = (gamma * max_step(&z_blocks, &dz)).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            break;
        }
        for j in 0..nblocks {
            x_blocks[j] = x_blocks[j].axpy(ap, &dx[j]).symmetrize();
            z_blocks[j] = z_blocks[j].axpy(ad, &dz[j]).symmetrize();
        }
        for i in 0..m {
            y[i] += ad * dy[i];
        }
    }

    // final certification attempt
    let margin = cert(&y[..s.num_scalars]);
    let status = if margin >= target_margin {
        Phase1Status::CertFeasible
    } else {
        Phase1Status::Budget
    };
    IpmOutcome { x: y[..s.num_scalars].to_vec(), iterations: max_iterations, t: y[t_idx], status }
}

fn neg_identity(n: usize) -> Mat {
    Mat::identity(n).scale(-1.0)
}

fn chol_inverse(l: &Mat) -> Mat {
    let n = l.rows();
    let mut inv = Mat::zeros(n, n);
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = cholesky_solve(l, &e);
        for r in 0..n {
            inv[(r, c)] = col[r];
        }
    }
    inv.symmetrize()
}

/// Largest α with `X + α dX ⪰ 0`, computed exactly from the generalized
/// eigenvalue `λ_min(L⁻¹ dX L⁻ᵀ)`.
fn max_step(xs: &[Mat], dxs: &[Mat]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (x, dx) in xs.iter().zip(dxs) {
        let l = match cholesky(x) {
            Some(l) => l,
            None => return 0.0,
        };
        // W = L⁻¹ dX L⁻ᵀ via two triangular solves per column
        let n = x.rows();
        let mut w = Mat::zeros(n, n);
        for c in 0..n {
            let col: Vec<f64> = (0..n).map(|r| dx[(r, c)]).collect();
            let v = forward_solve(&l, &col);
            for r in 0..n {
                w[(r, c)] = v[r];
            }
        }
        // now w = L⁻¹ dX; apply L⁻¹ to rows: W = (L⁻¹ (L⁻¹ dX)ᵀ)ᵀ
        let wt = w.transpose();
        let mut full = Mat::zeros(n, n);
        for c in 0..n {
            let col: Vec<f64> = (0..n).map(|r| wt[(r, c)]).collect();
            let v = forward_solve(&l, &col);
            for r in 0..n {
                full[(r, c)] = v[r];
            }
        }
        let lam_min = sym_eig_min(&full.transpose());
        if lam_min < 0.0 {
            alpha = alpha.min(-1.0 / lam_min);
        }
    }
    alpha.min(1.0e6)
}

fn forward_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Independent margin evaluation helper shared by the solver front end.
pub(crate) fn assignment_margin(problem: &LmiProblem, assign: &[Mat]) -> f64 {
    let mut margin = f64::INFINITY;
    for c in &problem.constraints {
        let m = c.eval(assign);
        let lam = match c.sense {
            Sense::Negative => -sym_eig(&m).0.last().copied().unwrap_or(f64::INFINITY),
            Sense::Positive => sym_eig_min(&m),
        };
        margin = margin.min(lam);
    }
    margin
}
