//! Randomized invariants of the matrix kernel and the synthesis algebra.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tdcomp::linalg::{self, Mat, DEFAULT_RANK_TOL};
use tdcomp::model::{Functional, MeasurementModel, Plant};
use tdcomp::synthesis;

fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Mat::from_vec(rows, cols, data).expect("finite")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// All four Penrose identities hold for the pseudoinverse.
    #[test]
    fn penrose_identities(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_mat(&mut rng, rows, cols);
        let p = linalg::pinv(&a, DEFAULT_RANK_TOL).unwrap();
        let scale = 1.0 + a.norm_max();
        let apa = a.matmul(&p).matmul(&a);
        prop_assert!(apa.sub_ref(&a).norm_max() <= 1e-9 * scale);
        let pap = p.matmul(&a).matmul(&p);
        prop_assert!(pap.sub_ref(&p).norm_max() <= 1e-9 * scale);
        let ap = a.matmul(&p);
        prop_assert!(ap.sub_ref(&ap.transpose()).norm_max() <= 1e-9 * scale);
        let pa = p.matmul(&a);
        prop_assert!(pa.sub_ref(&pa.transpose()).norm_max() <= 1e-9 * scale);
    }

    /// Rank is invariant under transposition and pseudoinversion.
    #[test]
    fn rank_transpose_pinv(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_mat(&mut rng, rows, cols);
        let r = linalg::rank(&a, DEFAULT_RANK_TOL);
        prop_assert_eq!(r, linalg::rank(&a.transpose(), DEFAULT_RANK_TOL));
        let p = linalg::pinv(&a, DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(r, linalg::rank(&p, DEFAULT_RANK_TOL));
    }
}

#[test]
fn eigenpair_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let a = rand_mat(&mut rng, n, n);
        let spectrum = linalg::eig(&a).unwrap();
        for lam in &spectrum.eigenvalues {
            let v = linalg::eig_vector(&a, *lam).unwrap();
            let mut res = 0.0f64;
            for i in 0..n {
                let mut av = num_complex::Complex64::new(0.0, 0.0);
                for j in 0..n {
                    av += a[(i, j)] * v[j];
                }
                res = res.max((av - lam * v[i]).norm());
            }
            assert!(
                res <= 1e-8 * a.norm_max().max(1.0),
                "residual {res} for eigenvalue {lam}"
            );
        }
    }
}

#[test]
fn rayleigh_quotient_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let m = rand_mat(&mut rng, n, n);
        let a = m.add_ref(&m.transpose());
        let lo = linalg::min_eig_sym(&a).unwrap();
        let hi = linalg::sym_eig_max(&a);
        let x = rand_mat(&mut rng, n, 1);
        let xtx = x.dot(&x);
        if xtx < 1e-12 {
            continue;
        }
        let quot = x.dot(&a.matmul(&x)) / xtx;
        assert!(lo - 1e-10 <= quot && quot <= hi + 1e-10);
    }
}

#[test]
fn solve_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let n = rng.random_range(1..=7);
        // well-conditioned by construction: diagonally dominant
        let mut a = rand_mat(&mut rng, n, n);
        for i in 0..n {
            a[(i, i)] += 4.0;
        }
        let cols = rng.random_range(1..=3);
        let x0 = rand_mat(&mut rng, n, cols);
        let b = a.matmul(&x0);
        let x = linalg::solve(&a, &b).unwrap();
        assert!(x.sub_ref(&x0).norm_max() <= 1e-10 * (1.0 + x0.norm_max()));
    }
}

/// Random decoupling parameterization: any `X = Z(I − ΘΘ⁺)` annihilates Θ.
#[test]
fn nullspace_parameterization_annihilates() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut tested = 0;
    while tested < 100 {
        let n: usize = rng.random_range(2..=4);
        let rows = n + rng.random_range(1..=3);
        let theta = rand_mat(&mut rng, rows, n);
        let proj = match synthesis::nullspace_parameterization(&theta) {
            Ok(p) => p,
            Err(_) => continue,
        };
        tested += 1;
        let z = rand_mat(&mut rng, 2, rows);
        let x = z.matmul(&proj);
        assert!(
            x.matmul(&theta).norm_max() <= 1e-10 * (1.0 + z.norm_max()),
            "XΘ must vanish"
        );
    }
}

/// The full-rank branch solves its defining equation exactly.
#[test]
fn case1_defining_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut tested = 0;
    while tested < 100 {
        let n: usize = rng.random_range(2..=4);
        let p = usize::div_ceil(n, 2) + 1;
        let plant = match Plant::new(rand_mat(&mut rng, n, n), rand_mat(&mut rng, n, 1)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let c = rand_mat(&mut rng, p, n);
        let theta_bar = Mat::vstack(&[&c, &c.matmul(&plant.a)]);
        if linalg::rank(&theta_bar, DEFAULT_RANK_TOL) != n {
            continue;
        }
        let meas = match MeasurementModel::single(c, 1.0) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let m_dim = rng.random_range(1..=n);
        let func = match Functional::new(rand_mat(&mut rng, m_dim, n)) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let n_tau = rand_mat(&mut rng, m_dim, m_dim);
        let gains = match synthesis::case1_solve_xbar(&n_tau, &func, &meas, &plant) {
            Ok(g) => g,
            Err(_) => continue,
        };
        tested += 1;
        let lhs = gains.x_bar.matmul(&theta_bar);
        let rhs = n_tau.matmul(&func.f).scale(-1.0);
        assert!(lhs.sub_ref(&rhs).norm_max() <= 1e-9 * (1.0 + rhs.norm_max()));
    }
}

/// Augmentation always restores the row-space condition.
#[test]
fn augmentation_restores_rank_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut tested = 0;
    while tested < 100 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..n);
        let plant = match Plant::new(rand_mat(&mut rng, n, n), rand_mat(&mut rng, n, 1)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let func = match Functional::new(rand_mat(&mut rng, m, n)) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if synthesis::check_rank_condition(&func, &plant) {
            continue;
        }
        let aug = synthesis::augment(&func, &plant).unwrap();
        tested += 1;
        // SVD oracle: rank of the stacked matrix equals rank of F̄
        let fa = aug.f_bar.f.matmul(&plant.a);
        let stack = Mat::vstack(&[&fa, &aug.f_bar.f]);
        assert_eq!(
            linalg::rank(&stack, DEFAULT_RANK_TOL),
            linalg::rank(&aug.f_bar.f, DEFAULT_RANK_TOL),
        );
        // the first rows are the original functional
        let head = aug.f_bar.f.block(0, 0, m, n);
        assert!(head.sub_ref(&func.f).norm_max() == 0.0);
    }
}

/// Stacking a delayed copy of an observable channel always passes the
/// two-delay rank test.
#[test]
fn extended_measurement_rank_implication() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut tested = 0;
    while tested < 100 {
        let n: usize = rng.random_range(2..=4);
        let p = usize::div_ceil(n, 2);
        let plant = match Plant::new(rand_mat(&mut rng, n, n), rand_mat(&mut rng, n, 1)) {
            Ok(pl) => pl,
            Err(_) => continue,
        };
        let c = rand_mat(&mut rng, p, n);
        let theta_bar = Mat::vstack(&[&c, &c.matmul(&plant.a)]);
        if linalg::rank(&theta_bar, DEFAULT_RANK_TOL) != n {
            continue;
        }
        let meas = match MeasurementModel::single(c, 1.0) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let ext = synthesis::extend_measurement(&meas, 0.5).unwrap();
        tested += 1;
        assert!(synthesis::two_delay_rank_check(&ext, &plant).unwrap());
    }
}

/// When the row-space condition holds, the observer dynamics inherit part
/// of the plant spectrum.
#[test]
fn observer_spectrum_containment() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut tested = 0;
    while tested < 100 {
        let n = rng.random_range(2..=5);
        let m = rng.random_range(1..=n - 1);
        // build (A, F) with a left-invariant row space: W A W⁻¹ block
        // lower-triangular and F the first block rows of W
        let mut w = rand_mat(&mut rng, n, n);
        for i in 0..n {
            w[(i, i)] += 3.0;
        }
        let winv = match linalg::solve(&w, &Mat::identity(n)) {
            Ok(x) => x,
            Err(_) => continue,
        };
        let mut block = rand_mat(&mut rng, n, n);
        for i in 0..m {
            for j in m..n {
                block[(i, j)] = 0.0;
            }
        }
        let a = winv.matmul(&block).matmul(&w);
        let plant = match Plant::new(a, Mat::zeros(n, 1)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let func = match Functional::new(w.block(0, 0, m, n)) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if !synthesis::check_rank_condition(&func, &plant) {
            continue;
        }
        let n_mat = synthesis::compute_n(&func, &plant).unwrap();
        tested += 1;
        assert!(
            synthesis::spectrum_contained(&n_mat, &plant.a, 1e-6).unwrap(),
            "observer spectrum must sit inside the plant spectrum"
        );
    }
}

/// Observers produced by assembly satisfy the gain recovery relations
/// `G = Ḡ + NM` and `G_τ = N_τ M`.
#[test]
fn gain_recovery_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut tested = 0;
    while tested < 50 {
        let n = rng.random_range(2..=4);
        let plant = match Plant::new(rand_mat(&mut rng, n, n), rand_mat(&mut rng, n, 1)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let meas = match MeasurementModel::single(Mat::identity(n), 1.0) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let m_dim = rng.random_range(1..=n);
        let func = match Functional::new(rand_mat(&mut rng, m_dim, n)) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let n_mat = match synthesis::compute_n(&func, &plant) {
            Ok(x) => x,
            Err(_) => continue,
        };
        let n_tau = rand_mat(&mut rng, m_dim, m_dim);
        let gains = match synthesis::case1_solve_xbar(&n_tau, &func, &meas, &plant) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let obs = match synthesis::assemble_single(
            &plant, &meas, &func, &n_mat, &n_tau, &gains.g_bar, &gains.m,
        ) {
            Ok(o) => o,
            Err(_) => continue,
        };
        tested += 1;
        let g_bar_rt = obs.g.sub_ref(&obs.n.matmul(&obs.m));
        assert!(g_bar_rt.sub_ref(&gains.g_bar).norm_max() <= 1e-12 * (1.0 + gains.g_bar.norm_max()));
        let g_tau_rt = obs.n_tau.matmul(&obs.m);
        assert!(g_tau_rt.sub_ref(&obs.g_tau).norm_max() == 0.0);
    }
}
