//! Numeric verification of the integral inequalities behind the stability
//! conditions, structural invariants of the constraint maps, and soundness
//! of the feasibility engine.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdcomp::dde::{rightmost_roots, DdeSystem};
use tdcomp::linalg::{self, Mat};
use tdcomp::lmi::{self, LmiProblem, SelectorBasis, StructuredChannel};
use tdcomp::sdp::{self, SolverConfig};

fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Mat::from_vec(rows, cols, data).expect("finite")
}

fn rand_pd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let m = rand_mat(rng, n, n);
    m.matmul(&m.transpose()).add_ref(&Mat::identity(n).scale(0.1))
}

/// Composite Simpson quadrature of a vector-valued scalar integrand.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = f(a) + f(b);
    for k in 1..panels {
        let x = a + k as f64 * h;
        total += f(x) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    total * h / 3.0
}

/// The Wirtinger-based integral inequality, checked by quadrature on random
/// polynomial trajectories: for differentiable φ and R ≻ 0,
/// `∫φ̇ᵀRφ̇ ≥ (1/L)(Δφ)ᵀR(Δφ) + (12/L)ΩᵀRΩ` with
/// `Ω = (φ(b)+φ(a))/2 − (1/L)∫φ`.
#[test]
fn wirtinger_integral_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let deg = rng.random_range(1..=5);
        let a = rng.random_range(-1.0..0.0);
        let b = a + rng.random_range(0.5..2.0);
        let len = b - a;
        // φ_i(u) = Σ_k c_{ik} u^k
        let coef: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let phi = |u: f64| -> Vec<f64> {
            coef.iter()
                .map(|cs| cs.iter().rev().fold(0.0, |acc, c| acc * u + c))
                .collect()
        };
        let dphi = |u: f64| -> Vec<f64> {
            coef.iter()
                .map(|cs| {
                    cs.iter()
                        .enumerate()
                        .skip(1)
                        .rev()
                        .fold(0.0, |acc, (k, c)| acc * u + k as f64 * c)
                })
                .collect()
        };
        let r = rand_pd(&mut rng, n);
        let quad_form = |v: &[f64]| -> f64 {
            let vm = Mat::col_vec(v);
            vm.dot(&r.matmul(&vm))
        };
        let lhs = simpson(|u| quad_form(&dphi(u)), a, b, 2048);
        let pa = phi(a);
        let pb = phi(b);
        let delta: Vec<f64> = pb.iter().zip(&pa).map(|(x, y)| x - y).collect();
        let mean: Vec<f64> = (0..n)
            .map(|i| simpson(|u| phi(u)[i], a, b, 2048) / len)
            .collect();
        let omega: Vec<f64> = (0..n)
            .map(|i| 0.5 * (pb[i] + pa[i]) - mean[i])
            .collect();
        let rhs = quad_form(&delta) / len + 12.0 / len * quad_form(&omega);
        assert!(lhs >= rhs - 1e-6 * (1.0 + lhs.abs()), "lhs {lhs} rhs {rhs}");
    }
}

/// The reciprocally convex combination bound: whenever the coupled block
/// matrix is positive semidefinite, the 1/α + 1/(1−α) combination dominates
/// the coupled quadratic form for every α in (0,1).
#[test]
fn reciprocally_convex_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=4);
        let r = rand_pd(&mut rng, n);
        // shrink S until the coupled block matrix is positive definite
        let mut s = rand_mat(&mut rng, n, n);
        let block = |s: &Mat| -> Mat {
            let top = Mat::hstack(&[&r, s]);
            let bottom = Mat::hstack(&[&s.transpose(), &r]);
            Mat::vstack(&[&top, &bottom])
        };
        for _ in 0..60 {
            if linalg::min_eig_sym(&block(&s)).unwrap() > 1e-9 {
                break;
            }
            s = s.scale(0.8);
        }
        let coupled = block(&s);
        assert!(linalg::min_eig_sym(&coupled).unwrap() > 0.0);

        let w1 = rand_mat(&mut rng, n, m);
        let w2 = rand_mat(&mut rng, n, m);
        let xi = rand_mat(&mut rng, m, 1);
        let v1 = w1.matmul(&xi);
        let v2 = w2.matmul(&xi);
        let stacked = Mat::vstack(&[&v1, &v2]);
        let rhs = stacked.dot(&coupled.matmul(&stacked));
        for _ in 0..50 {
            let alpha: f64 = rng.random_range(0.001..0.999);
            let lhs = v1.dot(&r.matmul(&v1)) / alpha + v2.dot(&r.matmul(&v2)) / (1.0 - alpha);
            assert!(lhs >= rhs - 1e-9 * (1.0 + lhs.abs()), "alpha {alpha}: {lhs} < {rhs}");
        }
    }
}

#[test]
fn selector_basis_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let k = if rng.random_range(0..2) == 0 { 4 } else { 8 };
        let basis = SelectorBasis::new(n, k);
        let mut sum = Mat::zeros(k * n, k * n);
        for i in 1..=k {
            for j in 1..=k {
                let prod = basis.v(i).transpose().matmul(&basis.v(j));
                let want = if i == j { Mat::identity(n) } else { Mat::zeros(n, n) };
                assert_eq!(prod.sub_ref(&want).norm_max(), 0.0);
            }
            sum = sum.add_ref(&basis.v(i).matmul(&basis.v(i).transpose()));
        }
        assert_eq!(sum.sub_ref(&Mat::identity(k * n)).norm_max(), 0.0);
    }
}

fn sample_problems() -> Vec<LmiProblem> {
    let n2 = Mat::from_rows(&[&[0.0, 1.0], &[-2.0, 0.1]]);
    let nt2 = Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
    let zero2 = Mat::zeros(2, 2);
    let row = Mat::row_vec(&[1.0, 2.0]);
    let base = StructuredChannel { fixed: n2.clone(), structured: Mat::zeros(1, 2) };
    let ch = StructuredChannel { fixed: zero2.clone(), structured: row.clone() };
    vec![
        lmi::stability_constant(&n2, &nt2, 1.2).unwrap(),
        lmi::stability_interval(&n2, &nt2, 0.5, 1.5).unwrap(),
        lmi::stability_interval_pd(&n2, &nt2, 0.5, 1.5).unwrap(),
        lmi::stability_multi(&n2, [&zero2, &zero2, &nt2], [0.4, 0.8, 1.2]).unwrap(),
        lmi::synth_constant(&n2, 1.0, 0.7).unwrap(),
        lmi::synth_interval(&n2, 0.5, 1.2, 0.7).unwrap(),
        lmi::synth_structured_constant(&n2, &Mat::zeros(1, 2), &zero2, &row, 1.0, 0.7).unwrap(),
        lmi::synth_structured_interval(&n2, &Mat::zeros(1, 2), &zero2, &row, 0.5, 1.2, 0.7)
            .unwrap(),
        lmi::synth_two_delay(
            &n2,
            &Mat::zeros(1, 2),
            &zero2,
            &row,
            &zero2,
            &row,
            0.8,
            1.3,
            0.7,
        )
        .unwrap(),
        lmi::synth_three_delay(&base, [&ch, &ch, &ch], [0.4, 0.8, 1.2], 0.7).unwrap(),
    ]
}

fn random_assignment(rng: &mut ChaCha8Rng, problem: &LmiProblem) -> Vec<Mat> {
    problem
        .vars
        .iter()
        .map(|v| {
            let (r, c) = v.kind.shape();
            let m = rand_mat(rng, r, c);
            if v.kind.is_symmetric() {
                m.symmetrize()
            } else {
                m
            }
        })
        .collect()
}

/// Every constraint map is exactly symmetric and affine in the variables.
#[test]
fn constraint_maps_symmetric_and_affine() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for problem in sample_problems() {
        for _ in 0..10 {
            let x = random_assignment(&mut rng, &problem);
            let y = random_assignment(&mut rng, &problem);
            let xy: Vec<Mat> = x.iter().zip(&y).map(|(a, b)| a.add_ref(b)).collect();
            let zero = problem.zero_assignment();
            for c in &problem.constraints {
                let cx = c.eval(&x);
                let scale = 1.0 + cx.norm_max();
                assert!(
                    cx.sub_ref(&cx.transpose()).norm_max() <= 1e-12 * scale,
                    "{}::{} must be symmetric",
                    problem.id,
                    c.name
                );
                let affine_defect = c
                    .eval(&xy)
                    .sub_ref(&cx)
                    .sub_ref(&c.eval(&y))
                    .add_ref(&c.eval(&zero));
                assert!(
                    affine_defect.norm_max() <= 1e-12 * scale,
                    "{}::{} must be affine",
                    problem.id,
                    c.name
                );
            }
        }
    }
}

/// Feasible verdicts are sound: the certified system always has a strictly
/// negative rightmost characteristic root.
#[test]
fn feasibility_implies_root_stability() {
    let cfg = SolverConfig::default();
    // published instances
    let n = Mat::from_rows(&[&[0.0, 1.0], &[-2.0, 0.1]]);
    let nt = Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
    for tau in [0.5, 1.0, 1.4, 1.54] {
        let p = lmi::stability_constant(&n, &nt, tau).unwrap();
        if sdp::solve(&p, &cfg).is_feasible() {
            let sys = DdeSystem::new(n.clone(), vec![(nt.clone(), tau)]).unwrap();
            let rep = rightmost_roots(&sys, 16).unwrap();
            assert!(rep.abscissa < 0.0, "tau {tau}: abscissa {}", rep.abscissa);
        }
    }
    // random instances
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut feasible_seen = 0;
    for _ in 0..20 {
        let dim = rng.random_range(1..=3);
        let raw = rand_mat(&mut rng, dim, dim);
        let spec = linalg::eig(&raw).unwrap();
        // shift to make the delay-free part stable
        let shift = spec.eigenvalues.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re)) + 0.5;
        let n_mat = raw.sub_ref(&Mat::identity(dim).scale(shift));
        let n_tau = rand_mat(&mut rng, dim, dim).scale(0.3);
        let tau = rng.random_range(0.2..1.5);
        let p = lmi::stability_constant(&n_mat, &n_tau, tau).unwrap();
        if sdp::solve(&p, &cfg).is_feasible() {
            feasible_seen += 1;
            let sys = DdeSystem::new(n_mat, vec![(n_tau, tau)]).unwrap();
            let rep = rightmost_roots(&sys, 16).unwrap();
            assert!(rep.abscissa < 0.0, "abscissa {}", rep.abscissa);
        }
    }
    assert!(feasible_seen >= 10, "expected mostly feasible random stable instances");
}

/// Scaling all constraint data by 10 flips no verdicts.
#[test]
fn verdicts_scale_invariant() {
    let cfg = SolverConfig::default();
    let n = Mat::from_rows(&[&[0.0, 1.0], &[-2.0, 0.1]]);
    let nt = Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
    for tau in [1.0, 1.54, 1.8] {
        let p = lmi::stability_constant(&n, &nt, tau).unwrap();
        let mut scaled = p.clone();
        for c in &mut scaled.constraints {
            c.constant = c.constant.scale(10.0);
            for t in &mut c.terms {
                t.coeff *= 10.0;
            }
        }
        let v1 = sdp::solve(&p, &cfg);
        let v2 = sdp::solve(&scaled, &cfg);
        assert_eq!(v1.is_feasible(), v2.is_feasible(), "tau {tau}");
    }
}

/// Identical inputs give identical verdicts and sweep traces.
#[test]
fn engine_is_deterministic() {
    let cfg = SolverConfig::default();
    let n = Mat::from_rows(&[&[0.0, 1.0], &[-2.0, 0.1]]);
    let nt = Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
    let run = || {
        let p = lmi::stability_constant(&n, &nt, 1.54).unwrap();
        sdp::solve(&p, &cfg)
    };
    let a = run();
    let b = run();
    assert_eq!(a.margin.to_bits(), b.margin.to_bits());
    assert_eq!(a.iterations, b.iterations);

    let sweep = |_: ()| {
        sdp::max_delay(
            "det",
            |tau| {
                lmi::stability_constant(&n, &nt, tau)
                    .map(|p| sdp::solve(&p, &cfg).is_feasible())
                    .unwrap_or(false)
            },
            0.5,
            2.5,
            0.05,
        )
        .unwrap()
    };
    let s1 = sweep(());
    let s2 = sweep(());
    assert_eq!(s1.certified_max_delay.to_bits(), s2.certified_max_delay.to_bits());
    assert_eq!(s1.trace.len(), s2.trace.len());
    for ((t1, f1), (t2, f2)) in s1.trace.iter().zip(&s2.trace) {
        assert_eq!(t1.to_bits(), t2.to_bits());
        assert_eq!(f1, f2);
    }
}

/// The sweep trace never reports a feasible point above an infeasible one.
#[test]
fn sweep_trace_is_monotone_consistent() {
    let cfg = SolverConfig::default();
    let n = Mat::from_rows(&[&[0.0, 1.0], &[-2.0, 0.1]]);
    let nt = Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
    let sweep = sdp::max_delay(
        "trace",
        |tau| {
            lmi::stability_constant(&n, &nt, tau)
                .map(|p| sdp::solve(&p, &cfg).is_feasible())
                .unwrap_or(false)
        },
        0.5,
        2.5,
        0.02,
    )
    .unwrap();
    for (t_feas, _) in sweep.trace.iter().filter(|(_, ok)| *ok) {
        for (t_inf, _) in sweep.trace.iter().filter(|(_, ok)| !*ok) {
            assert!(t_inf > t_feas, "feasible {t_feas} above infeasible {t_inf}");
        }
    }
}

/// Interval conditions are sound too: wherever they certify a delay range,
/// sampled rightmost roots inside the range are strictly negative.
#[test]
fn interval_feasibility_implies_root_stability() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mut feasible_seen = 0;
    for _ in 0..20 {
        let dim = rng.random_range(1..=2);
        let raw = rand_mat(&mut rng, dim, dim);
        let spec = linalg::eig(&raw).unwrap();
        let shift = spec.eigenvalues.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re)) + 0.4;
        let n_mat = raw.sub_ref(&Mat::identity(dim).scale(shift));
        let n_tau = rand_mat(&mut rng, dim, dim).scale(0.4);
        let lo = rng.random_range(0.2..0.6);
        let hi = lo + rng.random_range(0.2..1.0);
        for pd in [false, true] {
            let problem = if pd {
                lmi::stability_interval_pd(&n_mat, &n_tau, lo, hi).unwrap()
            } else {
                lmi::stability_interval(&n_mat, &n_tau, lo, hi).unwrap()
            };
            if sdp::solve(&problem, &cfg).is_feasible() {
                feasible_seen += 1;
                for tau in [lo, 0.5 * (lo + hi), hi] {
                    let sys =
                        DdeSystem::new(n_mat.clone(), vec![(n_tau.clone(), tau)]).unwrap();
                    let rep = rightmost_roots(&sys, 16).unwrap();
                    assert!(
                        rep.abscissa < 0.0,
                        "pd={pd} tau={tau}: abscissa {}",
                        rep.abscissa
                    );
                }
            }
        }
    }
    assert!(feasible_seen >= 12, "only {feasible_seen} feasible interval instances");
}

/// The parameter-dependent interval condition also assembles and solves at
/// three states (the largest block layout in the suite).
#[test]
fn interval_pd_three_state_round_trip() {
    let cfg = SolverConfig::default();
    // stable three-state system with a weak delayed channel
    let n_mat = Mat::from_rows(&[
        &[-1.0, 0.3, 0.0],
        &[0.1, -0.8, 0.2],
        &[0.0, -0.2, -1.2],
    ]);
    let n_tau = Mat::from_rows(&[
        &[0.2, 0.0, 0.1],
        &[0.0, 0.3, 0.0],
        &[0.1, 0.0, 0.2],
    ]);
    let p = lmi::stability_interval_pd(&n_mat, &n_tau, 0.4, 1.2).unwrap();
    let v = sdp::solve(&p, &cfg);
    assert!(v.is_feasible(), "margin {}", v.margin);
    // certified: sampled roots inside the range are negative
    for tau in [0.4, 0.8, 1.2] {
        let sys = DdeSystem::new(n_mat.clone(), vec![(n_tau.clone(), tau)]).unwrap();
        assert!(rightmost_roots(&sys, 16).unwrap().abscissa < 0.0);
    }
}
