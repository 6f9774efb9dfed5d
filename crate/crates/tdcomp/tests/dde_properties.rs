//! Cross-checks between the simulator, the root computation, and the exact
//! scalar stability test.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdcomp::dde::{rightmost_roots, scalar_mori_test, simulate, DdeSystem, History};
use tdcomp::linalg::Mat;

/// The decay slope of a simulated error trajectory matches the computed
/// spectral abscissa. Sampling one oscillation period apart cancels the
/// phase of the dominant complex pair.
#[test]
fn simulation_slope_matches_abscissa() {
    let cases = [
        // (a0, a1, tau) scalar error systems from the reference designs
        (0.5, -0.7, 1.0),
        (0.1, -0.6, 1.0),
        (-0.2, -0.4, 0.8),
    ];
    for (a0, a1, tau) in cases {
        let sys = DdeSystem::new(Mat::scalar(a0), vec![(Mat::scalar(a1), tau)]).unwrap();
        let rep = rightmost_roots(&sys, 16).unwrap();
        assert!(rep.abscissa < 0.0);
        let im = rep.rightmost[0].im.abs();
        let period = if im > 1e-9 { 2.0 * std::f64::consts::PI / im } else { 5.0 };
        let t1 = 12.0;
        let t2 = t1 + period;
        let traj = simulate(&sys, &History::ones(1), t2 + 1.0, tau / 100.0).unwrap();
        let slope = (traj.norm_at(t2).ln() - traj.norm_at(t1).ln()) / (t2 - t1);
        let rel = (slope - rep.abscissa).abs() / rep.abscissa.abs();
        assert!(rel <= 0.10, "slope {slope} vs abscissa {} (rel {rel})", rep.abscissa);
    }
}

/// Wherever the exact scalar test declares stability, the computed
/// rightmost root is strictly negative.
#[test]
fn scalar_test_implies_negative_abscissa() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut confirmed = 0;
    while confirmed < 20 {
        let a = rng.random_range(-1.0..1.0);
        let b = rng.random_range(-2.0..0.0);
        let tau = rng.random_range(0.1..3.0);
        if !scalar_mori_test(a, b, tau) {
            continue;
        }
        confirmed += 1;
        let sys = DdeSystem::new(Mat::scalar(a), vec![(Mat::scalar(b), tau)]).unwrap();
        let rep = rightmost_roots(&sys, 16).unwrap();
        assert!(
            rep.abscissa < 0.0,
            "a={a} b={b} tau={tau}: abscissa {}",
            rep.abscissa
        );
    }
}

/// Characteristic residuals of reported roots stay at refinement accuracy
/// across random stable and unstable systems.
#[test]
fn reported_roots_have_small_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..25 {
        let n = rng.random_range(1..=3);
        let a0_data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a1_data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let a0 = Mat::from_vec(n, n, a0_data).unwrap();
        let a1 = Mat::from_vec(n, n, a1_data).unwrap();
        let tau = rng.random_range(0.3..2.0);
        let sys = DdeSystem::new(a0, vec![(a1, tau)]).unwrap();
        let rep = rightmost_roots(&sys, 16).unwrap();
        if rep.refined {
            assert!(rep.residual <= 1e-8, "residual {}", rep.residual);
        }
    }
}
