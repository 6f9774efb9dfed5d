//! Acceptance suite: each test is one release criterion and prints one
//! summary line (plus the failing checks, if any). Run with `--nocapture`
//! to see every line.

use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdcomp::catalog::{self, Check};
use tdcomp::dde::{rightmost_roots, DdeSystem};
use tdcomp::linalg::{self, Mat};
use tdcomp::lmi;
use tdcomp::sdp::{self, SolverConfig};

static CACHE: LazyLock<Mutex<HashMap<String, Vec<Check>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn scenario(name: &str) -> Vec<Check> {
    let mut cache = CACHE.lock().unwrap();
    if let Some(found) = cache.get(name) {
        return found.clone();
    }
    let cfg = SolverConfig::default();
    let checks = catalog::run_scenario(name, &cfg);
    cache.insert(name.to_string(), checks.clone());
    checks
}

/// Assert that every check whose name contains one of the needles passed,
/// and that at least one such check exists per needle.
fn criterion(number: u32, title: &str, sources: &[&str], needles: &[&str]) {
    let mut all: Vec<Check> = Vec::new();
    for s in sources {
        all.extend(scenario(s));
    }
    let mut failed = Vec::new();
    for needle in needles {
        let hits: Vec<&Check> = all.iter().filter(|c| c.name.contains(needle)).collect();
        assert!(!hits.is_empty(), "criterion {number}: no check matches '{needle}'");
        failed.extend(hits.into_iter().filter(|c| !c.passed).cloned());
    }
    if failed.is_empty() {
        println!("criterion {number} ({title}): PASS");
    } else {
        println!("criterion {number} ({title}): FAIL");
        for f in &failed {
            println!("  {f}");
        }
        panic!("criterion {number} failed");
    }
}

#[test]
fn criterion_01_eigenvalues() {
    criterion(
        1,
        "plant spectra exact to 1e-9",
        &["example1", "example3"],
        &["example1/eig_low", "example1/eig_high", "example3/eig_low", "example3/eig_high"],
    );
}

#[test]
fn criterion_02_generalized_inverse_synthesis() {
    criterion(
        2,
        "pinned-gain decoupling solves match printed tables",
        &["example1", "example3", "example5", "example6"],
        &["example1/xbar_row1", "example3/G_bar", "example3/M", "example5/xbar", "example6/xbar_row1"],
    );
}

#[test]
fn criterion_03_observer_residuals() {
    criterion(
        3,
        "assembled ≤ 1e-8, printed ≤ 1e-2 coupling residuals",
        &["example1", "example3", "example5", "example6"],
        &[
            "example1/assembled_residual",
            "example1/printed_residual",
            "example3/residual",
            "example5/residual",
            "example6/residual",
        ],
    );
}

#[test]
fn criterion_04_rightmost_roots() {
    criterion(
        4,
        "error-system roots within 1e-3, residual ≤ 1e-8",
        &["example1", "example3"],
        &[
            "example1/root_re",
            "example1/root_im",
            "example1/root_residual",
            "example3/root_re",
            "example3/root_im",
            "example3/root_residual",
        ],
    );
}

#[test]
fn criterion_05_scalar_exact_bound() {
    criterion(
        5,
        "analytic scalar delay limit at exactly 2.0",
        &["example3"],
        &["example3/scalar_delay_limit", "example3/mori_inside", "example3/mori_boundary"],
    );
}

#[test]
fn criterion_06_stability_comparison_pair() {
    criterion(
        6,
        "single-delay marginal vs two-delay certified stable",
        &["example5"],
        &[
            "example5/marginal_abscissa_nonneg",
            "example5/marginal_no_decay",
            "example5/two_delay_abscissa",
            "example5/two_delay_lmi",
        ],
    );
}

#[test]
fn criterion_07_lmi_maxima() {
    criterion(
        7,
        "published delay bounds within tolerance",
        &[
            "bench_constant",
            "bench_interval",
            "bench_interval_pd",
            "bench_partitioned",
            "bench_two_delay_stability",
            "bench_synth_constant",
            "bench_synth_structured",
            "bench_synth_two_delay",
            "bench_synth_three_delay",
        ],
        &[
            "bench_constant/max_delay",
            "bench_interval/feasible_0.2_1.42",
            "bench_interval/feasible_0.3_1.55",
            "bench_interval/feasible_0.5_1.65",
            "bench_interval/feasible_0.8_1.66",
            "bench_interval/feasible_1.2_1.64",
            "bench_interval/infeasible",
            "bench_interval_pd/feasible_0.2_1.62",
            "bench_interval_pd/feasible_0.5_1.67",
            "bench_interval_pd/infeasible",
            "bench_partitioned/max_delay",
            "bench_two_delay_stability/feasible_1.68",
            "bench_two_delay_stability/achieved_not_lower",
            "bench_synth_constant/feasible_4.8",
            "bench_synth_constant/infeasible_5.52",
            "bench_synth_constant/interval_2_4.78",
            "bench_synth_structured/feasible_2.2",
            "bench_synth_structured/infeasible_2.53",
            "bench_synth_structured/interval_1_2.1",
            "bench_synth_two_delay/scalar_0.595_0.8",
            "bench_synth_two_delay/single_0.495",
            "bench_synth_two_delay/single_0.595",
            "bench_synth_two_delay/three_state_2.43_2.7",
            "bench_synth_three_delay/feasible",
        ],
    );
}

#[test]
fn criterion_08_synthesis_gains_certified() {
    // searched gains: certified closed-loop rightmost root < 0 everywhere
    criterion(
        8,
        "every synthesized gain set certified by roots",
        &[
            "example1", "example4", "example5", "example6", "example7",
            "bench_synth_three_delay",
        ],
        &[
            "example1/searched_abscissa",
            "example4/searched_abscissa",
            "example5/searched_abscissa",
            "example6/searched_abscissa",
            "example7/searched_abscissa",
            "bench_synth_three_delay/closed_loop_abscissa",
        ],
    );

    // printed gain sets are themselves valid certificates
    let scalar = Mat::scalar;
    let printed: Vec<(&str, DdeSystem)> = vec![
        (
            "three_state_constant",
            DdeSystem::new(
                catalog::bench_unstable3(),
                vec![(
                    Mat::from_rows(&[
                        &[-0.2033, 0.0001, -0.0004],
                        &[-0.1619, -0.1403, 0.0839],
                        &[0.0195, -0.1707, -0.1751],
                    ]),
                    4.8,
                )],
            )
            .unwrap(),
        ),
        (
            "three_state_interval_mid",
            DdeSystem::new(
                catalog::bench_unstable3(),
                vec![(
                    Mat::from_rows(&[
                        &[-0.2066, 0.0004, 0.0003],
                        &[-0.1570, -0.1460, 0.0833],
                        &[0.0174, -0.1751, -0.1731],
                    ]),
                    3.4,
                )],
            )
            .unwrap(),
        ),
        (
            "structured_row",
            DdeSystem::new(
                catalog::bench_unstable3(),
                vec![(
                    Mat::col_vec(&[-0.0568, -0.0726, -0.0601])
                        .matmul(&Mat::row_vec(&[1.0, 2.0, 3.0])),
                    2.2,
                )],
            )
            .unwrap(),
        ),
        (
            "scalar_two_channel",
            DdeSystem::new(
                scalar(2.0),
                vec![(scalar(-3.1605), 0.595), (scalar(1.1556), 0.8)],
            )
            .unwrap(),
        ),
        (
            "three_state_two_channel",
            DdeSystem::new(
                catalog::bench_unstable3(),
                vec![
                    (
                        Mat::col_vec(&[-0.2184, -0.2402, -0.1099])
                            .matmul(&Mat::row_vec(&[1.0, 2.0, 3.0])),
                        2.43,
                    ),
                    (
                        Mat::col_vec(&[0.1554, 0.1633, 0.0524])
                            .matmul(&Mat::row_vec(&[1.0, 2.0, 3.0])),
                        2.7,
                    ),
                ],
            )
            .unwrap(),
        ),
        (
            "three_state_three_channel",
            DdeSystem::new(
                catalog::bench_unstable3(),
                vec![
                    (
                        Mat::col_vec(&[-0.1159, -0.3993, -0.9907])
                            .matmul(&Mat::row_vec(&[1.0, 2.0, 3.0])),
                        3.65,
                    ),
                    (
                        Mat::col_vec(&[0.1158, 0.3869, 0.9271])
                            .matmul(&Mat::row_vec(&[1.0, 2.0, 3.0])),
                        3.7,
                    ),
                    (
                        Mat::col_vec(&[-0.2249, -0.1297, 0.0445])
                            .matmul(&Mat::row_vec(&[1.0, 0.0, 0.0])),
                        3.75,
                    ),
                ],
            )
            .unwrap(),
        ),
    ];
    let mut ok = true;
    for (name, sys) in &printed {
        let rep = rightmost_roots(sys, 16).expect("roots");
        let pass = rep.abscissa < 0.0;
        ok &= pass;
        println!(
            "criterion 8 printed-gain certificate {name}: {} (abscissa {:.4})",
            if pass { "PASS" } else { "FAIL" },
            rep.abscissa
        );
    }
    assert!(ok, "criterion 8: a printed gain set failed its root certificate");
}

#[test]
fn criterion_09_decoupling_suite() {
    criterion(
        9,
        "20 random designs: input-invariant, decaying error",
        &["decoupling"],
        &["decoupling/produced_20", "input_invariance", "tail_norm"],
    );
}

#[test]
fn criterion_10_inequality_property_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let rand_mat = |rng: &mut ChaCha8Rng, r: usize, c: usize| -> Mat {
        let data: Vec<f64> = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        Mat::from_vec(r, c, data).unwrap()
    };

    // Penrose identities, 100 trials at 1e-9
    for _ in 0..100 {
        let rows = rng.random_range(1..=8);
        let cols = rng.random_range(1..=8);
        let a = rand_mat(&mut rng, rows, cols);
        let p = linalg::pinv(&a, linalg::DEFAULT_RANK_TOL).unwrap();
        let scale = 1.0 + a.norm_max();
        assert!(a.matmul(&p).matmul(&a). sub_ref(&a).norm_max() <= 1e-9 * scale);
        assert!(p.matmul(&a).matmul(&p).sub_ref(&p).norm_max() <= 1e-9 * scale);
        let ap = a.matmul(&p);
        assert!(ap.sub_ref(&ap.transpose()).norm_max() <= 1e-9 * scale);
        let pa = p.matmul(&a);
        assert!(pa.sub_ref(&pa.transpose()).norm_max() <= 1e-9 * scale);
    }
    println!("criterion 10 penrose: PASS");

    // Wirtinger integral inequality by quadrature, 100 trials at 1e-6
    for _ in 0..100 {
        let deg = rng.random_range(1..=5);
        let a = -1.0;
        let b = a + rng.random_range(0.5..2.0);
        let len: f64 = b - a;
        let coef: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = |u: f64| coef.iter().rev().fold(0.0, |acc, c| acc * u + c);
        let dphi = |u: f64| {
            coef.iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + k as f64 * c)
        };
        let r = rng.random_range(0.1..2.0);
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let panels = 2048;
            let h = len / panels as f64;
            let mut total = f(a) + f(b);
            for k in 1..panels {
                total += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            total * h / 3.0
        };
        let lhs = simpson(&|u| r * dphi(u) * dphi(u));
        let delta = phi(b) - phi(a);
        let omega = 0.5 * (phi(b) + phi(a)) - simpson(&|u| phi(u)) / len;
        let rhs = r * delta * delta / len + 12.0 / len * r * omega * omega;
        assert!(lhs >= rhs - 1e-6 * (1.0 + lhs.abs()));
    }
    println!("criterion 10 wirtinger: PASS");

    // reciprocally convex bound, 100 trials
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let g = rand_mat(&mut rng, n, n);
        let r = g.matmul(&g.transpose()).add_ref(&Mat::identity(n).scale(0.1));
        let mut s = rand_mat(&mut rng, n, n);
        let block = |s: &Mat| {
            Mat::vstack(&[
                &Mat::hstack(&[&r, s]),
                &Mat::hstack(&[&s.transpose(), &r]),
            ])
        };
        while linalg::min_eig_sym(&block(&s)).unwrap() <= 1e-9 {
            s = s.scale(0.8);
        }
        let coupled = block(&s);
        let v1 = rand_mat(&mut rng, n, m).matmul(&rand_mat(&mut rng, m, 1));
        let v2 = rand_mat(&mut rng, n, m).matmul(&rand_mat(&mut rng, m, 1));
        let stacked = Mat::vstack(&[&v1, &v2]);
        let rhs = stacked.dot(&coupled.matmul(&stacked));
        for _ in 0..50 {
            let alpha: f64 = rng.random_range(0.01..0.99);
            let lhs = v1.dot(&r.matmul(&v1)) / alpha + v2.dot(&r.matmul(&v2)) / (1.0 - alpha);
            assert!(lhs >= rhs - 1e-9 * (1.0 + lhs.abs()));
        }
    }
    println!("criterion 10 reciprocally-convex: PASS");

    // selector algebra, exact, 100 trials
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let k = if rng.random_range(0..2) == 0 { 4 } else { 8 };
        let basis = lmi::SelectorBasis::new(n, k);
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
    println!("criterion 10 selector-algebra: PASS");

    // constraint affinity over random assignments, 100 trials
    let problem = lmi::stability_interval(
        &Mat::from_rows(&[&[0.0, 1.0], &[-2.0, 0.1]]),
        &Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
        0.5,
        1.5,
    )
    .unwrap();
    for _ in 0..100 {
        let assign = |rng: &mut ChaCha8Rng| -> Vec<Mat> {
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
        };
        let x = assign(&mut rng);
        let y = assign(&mut rng);
        let xy: Vec<Mat> = x.iter().zip(&y).map(|(a, b)| a.add_ref(b)).collect();
        let zero = problem.zero_assignment();
        for c in &problem.constraints {
            let defect = c
                .eval(&xy)
                .sub_ref(&c.eval(&x))
                .sub_ref(&c.eval(&y))
                .add_ref(&c.eval(&zero));
            assert!(defect.norm_max() <= 1e-12 * (1.0 + c.eval(&x).norm_max()));
        }
    }
    println!("criterion 10 constraint-affinity: PASS");
}

#[test]
fn criterion_11_closed_loop() {
    criterion(
        11,
        "closed-loop realization: spectra and bounded convergence",
        &["example7"],
        &[
            "example7/abf_eig_low",
            "example7/abf_eig_high",
            "example7/state_error_union",
            "example7/state_error_abscissa",
            "example7/closed_loop_error_tail",
            "example7/closed_loop_bounded",
        ],
    );
}

#[test]
fn acceptance_summary_is_complete() {
    // one full catalog pass: everything a release must reproduce
    let all = sdp::SolverConfig::default();
    let checks = catalog::run_all(&all, None);
    assert!(checks.len() >= 20, "expected at least 20 golden checks");
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    for f in &failed {
        println!("{f}");
    }
    assert!(failed.is_empty(), "{} golden checks failed", failed.len());
}
