//! Built-in reference scenarios with their expected outcomes.
//!
//! Each scenario checks a published design or stability figure: observer
//! gain tables, delay bounds, rightmost roots, and simulation behavior. The
//! `repro` CLI command and the acceptance test suite both run these, so a
//! regression in any numeric path shows up as a named failing check.

use std::fmt;

use crate::dde::{
    rightmost_roots, scalar_mori_delay_limit, scalar_mori_test, simulate, simulate_closed_loop,
    simulate_coupled, DdeSystem, History, Signal,
};
use crate::linalg::{self, Mat};
use crate::lmi::{self, StructuredChannel};
use crate::model::{
    error_coefficients, error_system, Functional, FunctionalObserver, MeasurementModel, Plant,
    EXACT_RESIDUAL_TOL, PRINTED_RESIDUAL_TOL,
};
use crate::pipeline::{synthesize, SynthesisOptions};
use crate::sdp::{find_gains, max_delay, solve, SolverConfig, SynthesisFamily};
use crate::synthesis::{self, CaseTag};

/// One named pass/fail record with the values that were compared.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub expected: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<46} measured {} expected {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.expected
        )
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn new() -> Self {
        Checks(Vec::new())
    }

    fn approx(&mut self, name: &str, measured: f64, expected: f64, tol: f64) {
        self.0.push(Check {
            name: name.into(),
            passed: (measured - expected).abs() <= tol,
            measured: format!("{measured:.6}"),
            expected: format!("{expected:.6} ± {tol:.1e}"),
        });
    }

    fn le(&mut self, name: &str, measured: f64, bound: f64) {
        self.0.push(Check {
            name: name.into(),
            passed: measured <= bound,
            measured: format!("{measured:.3e}"),
            expected: format!("<= {bound:.3e}"),
        });
    }

    fn is_true(&mut self, name: &str, got: bool) {
        self.0.push(Check {
            name: name.into(),
            passed: got,
            measured: got.to_string(),
            expected: "true".into(),
        });
    }

    fn is_false(&mut self, name: &str, got: bool) {
        self.0.push(Check {
            name: name.into(),
            passed: !got,
            measured: got.to_string(),
            expected: "false".into(),
        });
    }

    fn mat_close(&mut self, name: &str, measured: &Mat, expected: &Mat, tol: f64) {
        let dev = measured.sub_ref(expected).norm_max();
        self.0.push(Check {
            name: name.into(),
            passed: dev <= tol,
            measured: format!("max dev {dev:.2e}"),
            expected: format!("within {tol:.1e}"),
        });
    }

    fn fail(&mut self, name: &str, why: String) {
        self.0.push(Check { name: name.into(), passed: false, measured: why, expected: "ok".into() });
    }
}

/// Deterministic 64-bit generator for the randomized suites (SplitMix64).
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (self.unit() + 1.0) / 2.0 * (hi - lo)
    }

    pub fn mat(&mut self, rows: usize, cols: usize) -> Mat {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.unit()).collect();
        Mat::from_vec(rows, cols, data).expect("finite")
    }
}

// ── reference problem data ──────────────────────────────────────────

/// Two-state plant with fully delayed state measurement (state estimation).
pub fn example1() -> (Plant, MeasurementModel, Functional) {
    let plant = Plant::new(
        Mat::from_rows(&[&[0.1, 1.0], &[1.0, -2.0]]),
        Mat::col_vec(&[1.0, 2.0]),
    )
    .expect("valid plant");
    let meas = MeasurementModel::single(Mat::identity(2), 1.0).expect("valid measurement");
    let func = Functional::new(Mat::identity(2)).expect("valid functional");
    (plant, meas, func)
}

/// The delayed gain printed for the state-estimation design.
pub fn example1_pinned_gain() -> Mat {
    Mat::from_rows(&[&[-0.5445, -0.2188], &[-0.2188, -0.0850]])
}

/// Same plant but only the first state is measured (still full-state goal).
pub fn example2() -> (Plant, MeasurementModel, Functional) {
    let (plant, _, func) = example1();
    let meas = MeasurementModel::single(Mat::row_vec(&[1.0, 0.0]), 1.0).expect("valid measurement");
    (plant, meas, func)
}

/// Scalar functional design: estimate x₂ from delayed x₁.
pub fn example3() -> (Plant, MeasurementModel, Functional) {
    let plant = Plant::new(
        Mat::from_rows(&[&[0.1, 1.0], &[0.0, 0.5]]),
        Mat::col_vec(&[1.0, 2.0]),
    )
    .expect("valid plant");
    let meas = MeasurementModel::single(Mat::row_vec(&[1.0, 0.0]), 1.0).expect("valid measurement");
    let func = Functional::new(Mat::row_vec(&[0.0, 1.0])).expect("valid functional");
    (plant, meas, func)
}

/// Three-state plant, one delayed measurement, two-functional goal
/// (the rank-deficient branch).
pub fn example4() -> (Plant, MeasurementModel, Functional) {
    let plant = Plant::new(
        Mat::from_rows(&[&[0.1, 1.0, 1.0], &[0.0, 0.2, 1.0], &[0.0, -1.0, -0.1]]),
        Mat::col_vec(&[1.0, 2.0, 3.0]),
    )
    .expect("valid plant");
    let meas =
        MeasurementModel::single(Mat::row_vec(&[1.0, 0.0, 0.0]), 1.0).expect("valid measurement");
    let func = Functional::new(Mat::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]))
        .expect("valid functional");
    (plant, meas, func)
}

/// The scalar design re-measured through an extra artificial delay so the
/// total measurement latency reaches 2.3 s.
pub fn example5() -> (Plant, MeasurementModel, Functional) {
    let (plant, _, func) = example3();
    let base = MeasurementModel::single(Mat::row_vec(&[1.0, 0.0]), 2.3).expect("valid measurement");
    let meas = synthesis::extend_measurement(&base, 0.7).expect("extendable");
    (plant, meas, func)
}

/// Two measurements with genuinely different delays.
pub fn example6() -> (Plant, MeasurementModel, Functional) {
    let plant = Plant::new(
        Mat::from_rows(&[&[0.5, 1.0], &[-2.0, 2.0]]),
        Mat::col_vec(&[1.0, 1.0]),
    )
    .expect("valid plant");
    let meas = MeasurementModel::two_delay(
        Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
        Mat::from_rows(&[&[0.0, 0.0], &[0.0, 1.0]]),
        0.65,
        1.65,
    )
    .expect("valid measurement");
    let func = Functional::new(Mat::identity(2)).expect("valid functional");
    (plant, meas, func)
}

/// Closed-loop design: the functional is a stabilizing feedback gain and
/// the row-space condition fails, forcing augmentation.
pub fn example7() -> (Plant, MeasurementModel, Functional) {
    let plant = Plant::new(
        Mat::from_rows(&[&[0.0, 1.0], &[0.1, 0.2]]),
        Mat::col_vec(&[0.0, 1.0]),
    )
    .expect("valid plant");
    let meas = MeasurementModel::single(Mat::row_vec(&[1.0, 0.0]), 1.0).expect("valid measurement");
    let func = Functional::new(Mat::row_vec(&[-0.6, -1.7])).expect("valid functional");
    (plant, meas, func)
}

/// Benchmark stability instance (oscillator with one delayed channel).
pub fn bench_system() -> (Mat, Mat) {
    (
        Mat::from_rows(&[&[0.0, 1.0], &[-2.0, 0.1]]),
        Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
    )
}

/// Benchmark stabilization instance (3-state unstable dynamics).
pub fn bench_unstable3() -> Mat {
    Mat::from_rows(&[&[0.2, 0.0, 0.0], &[0.2, 0.1, -0.1], &[0.0, 0.2, 0.15]])
}

// ── scenarios ───────────────────────────────────────────────────────

pub fn scenario_names() -> Vec<&'static str> {
    vec![
        "example1", "example2", "example3", "example4", "example5", "example6", "example7",
        "bench_constant", "bench_interval", "bench_interval_pd", "bench_partitioned",
        "bench_two_delay_stability", "bench_synth_constant", "bench_synth_structured",
        "bench_synth_two_delay", "bench_synth_three_delay", "decoupling",
    ]
}

/// Run every scenario whose name contains `filter` (all when `None`).
pub fn run_all(cfg: &SolverConfig, filter: Option<&str>) -> Vec<Check> {
    let mut checks = Vec::new();
    for name in scenario_names() {
        if let Some(f) = filter {
            if !name.contains(f) {
                continue;
            }
        }
        checks.extend(run_scenario(name, cfg));
    }
    checks
}

pub fn run_scenario(name: &str, cfg: &SolverConfig) -> Vec<Check> {
    match name {
        "example1" => scenario_example1(cfg),
        "example2" => scenario_example2(cfg),
        "example3" => scenario_example3(cfg),
        "example4" => scenario_example4(cfg),
        "example5" => scenario_example5(cfg),
        "example6" => scenario_example6(cfg),
        "example7" => scenario_example7(cfg),
        "bench_constant" => scenario_bench_constant(cfg),
        "bench_interval" => scenario_bench_interval(cfg),
        "bench_interval_pd" => scenario_bench_interval_pd(cfg),
        "bench_partitioned" => scenario_bench_partitioned(cfg),
        "bench_two_delay_stability" => scenario_bench_two_delay_stability(cfg),
        "bench_synth_constant" => scenario_bench_synth_constant(cfg),
        "bench_synth_structured" => scenario_bench_synth_structured(cfg),
        "bench_synth_two_delay" => scenario_bench_synth_two_delay(cfg),
        "bench_synth_three_delay" => scenario_bench_synth_three_delay(cfg),
        "decoupling" => scenario_decoupling(cfg),
        other => vec![Check {
            name: other.into(),
            passed: false,
            measured: "unknown scenario".into(),
            expected: "known scenario".into(),
        }],
    }
}

fn spectrum_sorted(a: &Mat) -> Vec<f64> {
    let mut re: Vec<f64> = linalg::eig(a)
        .expect("square")
        .eigenvalues
        .iter()
        .map(|z| z.re)
        .collect();
    re.sort_by(|a, b| a.partial_cmp(b).unwrap());
    re
}

fn scenario_example1(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (plant, meas, func) = example1();

    let re = spectrum_sorted(&plant.a);
    c.approx("example1/eig_low", re[0], -2.4, 1e-9);
    c.approx("example1/eig_high", re[1], 0.5, 1e-9);

    // pinned printed gain reproduces the published decoupling solve
    let opts = SynthesisOptions { pinned_n_tau: Some(example1_pinned_gain()), ..Default::default() };
    match synthesize(&plant, &meas, &func, &opts, cfg) {
        Ok(report) => {
            let gains =
                synthesis::case1_solve_xbar(&example1_pinned_gain(), &func, &meas, &plant)
                    .expect("full-rank branch");
            let want_row =
                Mat::row_vec(&[0.4359, 0.1745, 0.2181, 0.0869]);
            c.mat_close("example1/xbar_row1", &gains.x_bar.block(0, 0, 1, 4), &want_row, 2e-4);
            let coeffs = error_coefficients(&plant, &meas, &func, &report.observer)
                .expect("consistent");
            c.le("example1/assembled_residual", coeffs.residual_norm, EXACT_RESIDUAL_TOL);

            // rightmost roots of the error system
            let sys = error_system(&plant, &meas, &func, &report.observer).expect("decoupled");
            let rep = rightmost_roots(&sys, 16).expect("roots");
            c.approx("example1/root_re", rep.abscissa, -0.4725, 1e-3);
            c.approx("example1/root_im", rep.rightmost[0].im.abs(), 0.2865, 1e-3);
            c.le("example1/root_residual", rep.residual, 1e-8);
            c.is_true(
                "example1/pinned_gain_lmi_certificate",
                report
                    .certificates
                    .iter()
                    .any(|x| x.name == "pinned-gain stability" && x.margin.is_some()),
            );

            // estimation error vanishes under a square-wave input
            let traj = simulate_coupled(
                &plant,
                &meas,
                &func,
                &report.observer,
                Signal::Square { amplitude: 1.0, period: 5.0 },
                &History::ones(2),
                &History::zeros(2),
                20.0,
                0.01,
            )
            .expect("simulation");
            c.le("example1/error_norm_at_20", traj.error_norm_at(20.0), 1e-3);
        }
        Err(e) => c.fail("example1/pinned_synthesis", e.to_string()),
    }

    // printed observer re-entered at 4-decimal precision stays decoupled
    let printed = FunctionalObserver::single(
        Mat::from_rows(&[&[0.2181, 0.0869], &[0.0869, 0.0357]]),
        plant.a.clone(),
        example1_pinned_gain(),
        Mat::from_rows(&[&[0.5445, 0.2188], &[0.2188, 0.0850]]),
        Mat::from_rows(&[&[-0.1378, -0.0551], &[-0.0551, -0.0220]]),
        Mat::col_vec(&[1.0, 2.0]),
        Mat::col_vec(&[-0.3918, -0.1582]),
        1.0,
    )
    .expect("dimensions");
    let coeffs = error_coefficients(&plant, &meas, &func, &printed).expect("consistent");
    c.le("example1/printed_residual", coeffs.residual_norm, PRINTED_RESIDUAL_TOL / 2.0);

    // free search also succeeds and certifies
    match synthesize(&plant, &meas, &func, &SynthesisOptions::default(), cfg) {
        Ok(report) => c.le("example1/searched_abscissa", report.error_roots.abscissa, -1e-6),
        Err(e) => c.fail("example1/searched_synthesis", e.to_string()),
    }

    // interval feasibility claims for the delayed-gain family
    let n = plant.a.clone();
    for (lo, hi, want) in [(0.001, 1.2, true), (0.8, 1.99, true), (0.8, 2.5, false)] {
        let fam = SynthesisFamily::Interval { n: n.clone(), tau_lo: lo, tau_hi: hi };
        let got = find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false);
        let label = format!("example1/interval_{lo}_{hi}");
        if want {
            c.is_true(&label, got);
        } else {
            c.is_false(&label, got);
        }
    }
    c.0
}

fn scenario_example2(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (plant, meas, func) = example2();
    let opts = SynthesisOptions { pinned_n_tau: Some(example1_pinned_gain()), ..Default::default() };
    match synthesize(&plant, &meas, &func, &opts, cfg) {
        Ok(report) => {
            c.mat_close("example2/G", &report.observer.g, &Mat::col_vec(&[0.6295, 0.2593]), 2e-4);
            c.mat_close(
                "example2/J_tau",
                &report.observer.j_tau,
                &Mat::col_vec(&[-0.2188, -0.0850]),
                2e-4,
            );
            c.mat_close("example2/M", &report.observer.m, &Mat::col_vec(&[0.2188, 0.0850]), 2e-4);
            c.le("example2/abscissa", report.error_roots.abscissa, -1e-6);
        }
        Err(e) => c.fail("example2/pinned_synthesis", e.to_string()),
    }
    c.0
}

fn scenario_example3(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (plant, meas, func) = example3();

    let re = spectrum_sorted(&plant.a);
    c.approx("example3/eig_low", re[0], 0.1, 1e-9);
    c.approx("example3/eig_high", re[1], 0.5, 1e-9);

    let n = synthesis::compute_n(&func, &plant).expect("row-space condition");
    c.approx("example3/N", n[(0, 0)], 0.5, 1e-12);

    let gains = synthesis::case1_solve_xbar(&Mat::scalar(-0.7), &func, &meas, &plant)
        .expect("full-rank branch");
    c.approx("example3/G_bar", gains.g_bar[(0, 0)], -0.07, 1e-12);
    c.approx("example3/M", gains.m[(0, 0)], 0.7, 1e-12);

    let opts = SynthesisOptions { pinned_n_tau: Some(Mat::scalar(-0.7)), ..Default::default() };
    match synthesize(&plant, &meas, &func, &opts, cfg) {
        Ok(report) => {
            let obs = &report.observer;
            c.approx("example3/G", obs.g[(0, 0)], 0.28, 1e-12);
            c.approx("example3/G_tau", obs.g_tau[(0, 0)], -0.49, 1e-12);
            c.approx("example3/J", obs.j[(0, 0)], 2.0, 1e-12);
            c.approx("example3/J_tau", obs.j_tau[(0, 0)], -0.7, 1e-12);
            let coeffs = error_coefficients(&plant, &meas, &func, obs).expect("consistent");
            c.le("example3/residual", coeffs.residual_norm, 1e-12);

            let sys = error_system(&plant, &meas, &func, obs).expect("decoupled");
            let rep = rightmost_roots(&sys, 16).expect("roots");
            c.approx("example3/root_re", rep.abscissa, -0.4041, 1e-3);
            c.approx("example3/root_im", rep.rightmost[0].im.abs(), 0.5311, 1e-3);
            c.le("example3/root_residual", rep.residual, 1e-8);

            // decay of the simulated error system
            let traj = simulate(&sys, &History::ones(1), 10.0, 0.005).expect("simulation");
            c.le("example3/error_norm_at_10", traj.norm_at(10.0), 0.05);
        }
        Err(e) => c.fail("example3/pinned_synthesis", e.to_string()),
    }

    // exact scalar delay bound: limit 2.0, boundary excluded
    c.approx("example3/scalar_delay_limit", scalar_mori_delay_limit(0.5), 2.0, 1e-15);
    c.is_true("example3/mori_inside", scalar_mori_test(0.5, -0.7, 1.0));
    c.is_false("example3/mori_boundary", scalar_mori_test(0.5, -0.5, 2.0));
    let _ = cfg;
    c.0
}

fn scenario_example4(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (plant, meas, func) = example4();

    let n = synthesis::compute_n(&func, &plant).expect("row-space condition");
    c.mat_close("example4/N", &n, &Mat::from_rows(&[&[0.2, 1.0], &[-1.0, -0.1]]), 1e-12);

    let theta = synthesis::build_theta(&func, &meas, &plant).expect("single-delay");
    c.is_true("example4/theta_shape", theta.rows() == 4 && theta.cols() == 3);
    let n_tau2 = synthesis::ntau2_from_theta(&theta, 2).expect("null space");
    let want = Mat::from_rows(&[
        &[0.3322, 0.3322],
        &[0.3322, 0.3322],
        &[0.0332, 0.0332],
        &[-0.3322, -0.3322],
    ]);
    c.mat_close("example4/n_tau2", &n_tau2, &want, 2e-4);

    let red = synthesis::case2_reduce(&n_tau2, linalg::DEFAULT_RANK_TOL).expect("reducible");
    c.mat_close("example4/n_bar", &red.n_bar, &Mat::row_vec(&[0.3322, 0.3322]), 2e-4);

    // pinned reduced gain reproduces the printed observer
    let opts = SynthesisOptions {
        pinned_z_bar: Some(Mat::col_vec(&[-1.1384, 0.2522])),
        ..Default::default()
    };
    match synthesize(&plant, &meas, &func, &opts, cfg) {
        Ok(report) => {
            let obs = &report.observer;
            c.is_true("example4/case2_taken", report.case == CaseTag::Case2Structured);
            c.mat_close(
                "example4/N_tau",
                &obs.n_tau,
                &Mat::from_rows(&[&[-0.3782, -0.3782], &[0.0838, 0.0838]]),
                2e-4,
            );
            c.mat_close("example4/M", &obs.m, &Mat::col_vec(&[0.3782, -0.0838]), 2e-4);
            c.mat_close("example4/G", &obs.g, &Mat::col_vec(&[-0.0460, -0.3615]), 2e-4);
            c.mat_close("example4/G_tau", &obs.g_tau, &Mat::col_vec(&[-0.1114, 0.0247]), 2e-4);
            c.mat_close("example4/J_tau", &obs.j_tau, &Mat::col_vec(&[-0.3782, 0.0838]), 2e-4);
            c.le("example4/abscissa", report.error_roots.abscissa, -1e-6);
        }
        Err(e) => c.fail("example4/pinned_synthesis", e.to_string()),
    }

    // free reduced-gain search also works at this delay
    match synthesize(&plant, &meas, &func, &SynthesisOptions::default(), cfg) {
        Ok(report) => c.le("example4/searched_abscissa", report.error_roots.abscissa, -1e-6),
        Err(e) => c.fail("example4/searched_synthesis", e.to_string()),
    }

    // reduced-family interval claims
    let z22 = Mat::zeros(2, 2);
    let z12 = Mat::zeros(1, 2);
    for (lo, hi, want) in [(0.001, 1.2, true), (0.8, 2.25, true), (1.0, 3.0, false)] {
        let fam = SynthesisFamily::StructuredInterval {
            n01: n.clone(),
            n02: z12.clone(),
            ntau1: z22.clone(),
            ntau2: red.n_bar.clone(),
            tau_lo: lo,
            tau_hi: hi,
        };
        let got = find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false);
        let label = format!("example4/interval_{lo}_{hi}");
        if want {
            c.is_true(&label, got);
        } else {
            c.is_false(&label, got);
        }
    }
    c.0
}

fn scenario_example5(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (plant, meas, func) = example5();

    // stacked extension produces the printed block pattern
    if let MeasurementModel::TwoDelay { c_tau, c_h, tau, h } = &meas {
        c.mat_close(
            "example5/c_tau",
            c_tau,
            &Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
            1e-15,
        );
        c.mat_close("example5/c_h", c_h, &Mat::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]), 1e-15);
        c.approx("example5/tau", *tau, 2.3, 1e-15);
        c.approx("example5/h", *h, 3.0, 1e-15);
    } else {
        c.fail("example5/extended", "expected a two-delay model".into());
    }
    c.is_true(
        "example5/rank_check",
        synthesis::two_delay_rank_check(&meas, &plant).unwrap_or(false),
    );

    // the single-delay design cannot reach 2.3 s: the comparison system at
    // its exact bound has a characteristic root at the origin
    let marginal = DdeSystem::new(Mat::scalar(0.5), vec![(Mat::scalar(-0.5), 2.0)]).expect("dde");
    let rep = rightmost_roots(&marginal, 16).expect("roots");
    c.is_true("example5/marginal_abscissa_nonneg", rep.abscissa >= -1e-9);
    let traj = simulate(&marginal, &History::ones(1), 40.0, 0.01).expect("simulation");
    c.is_true(
        "example5/marginal_no_decay",
        traj.sup_norm(20.0, 40.0) >= 0.5 * traj.sup_norm(0.0, 20.0),
    );

    // the two-delay error system is certified feasible and root-stable
    let stable =
        DdeSystem::new(Mat::scalar(0.5), vec![(Mat::scalar(-0.8566), 2.3), (Mat::scalar(0.3509), 3.0)])
            .expect("dde");
    let rep = rightmost_roots(&stable, 16).expect("roots");
    c.le("example5/two_delay_abscissa", rep.abscissa, -1e-4);
    let zero = Mat::zeros(1, 1);
    let p = lmi::stability_multi(
        &Mat::scalar(0.5),
        [&zero, &Mat::scalar(-0.8566), &Mat::scalar(0.3509)],
        [1.15, 2.3, 3.0],
    )
    .expect("valid data");
    c.is_true("example5/two_delay_lmi", solve(&p, cfg).is_feasible());

    // pinned printed gains reproduce the published observer
    let opts = SynthesisOptions {
        pinned_n_tau: Some(Mat::scalar(-0.8566)),
        pinned_n_h: Some(Mat::scalar(0.3509)),
        ..Default::default()
    };
    match synthesize(&plant, &meas, &func, &opts, cfg) {
        Ok(report) => {
            let obs = &report.observer;
            let gains = synthesis::two_delay_solve(
                &Mat::scalar(-0.8566),
                &Mat::scalar(0.3509),
                &func,
                &meas,
                &plant,
            )
            .expect("solvable");
            c.mat_close(
                "example5/xbar",
                &gains.x_bar,
                &Mat::row_vec(&[-0.0857, 0.0351, 0.8566, -0.3509]),
                2e-4,
            );
            c.mat_close("example5/G", &obs.g, &Mat::row_vec(&[0.3427, -0.1403]), 2e-4);
            c.mat_close("example5/G_tau", &obs.g_tau, &Mat::row_vec(&[-0.7338, 0.3006]), 2e-4);
            c.mat_close("example5/G_h", &obs.g_h.clone().expect("two-delay"), &Mat::row_vec(&[0.3006, -0.1231]), 2e-4);
            c.approx("example5/J", obs.j[(0, 0)], 2.0, 1e-12);
            c.approx("example5/J_tau", obs.j_tau[(0, 0)], -0.8566, 1e-12);
            c.approx("example5/J_h", obs.j_h.clone().expect("two-delay")[(0, 0)], 0.3509, 1e-12);
            let coeffs = error_coefficients(&plant, &meas, &func, obs).expect("consistent");
            c.le("example5/residual", coeffs.residual_norm, EXACT_RESIDUAL_TOL);

            // coupled simulation exercises the composite delays 2τ, τ+h,
            // 2h. With the plant pinned at the origin the error is the
            // pure observer transient and must track the certified rate
            // (abscissa ≈ −0.059) all the way down; with the unstable
            // plant active the check stays inside the horizon where the
            // true decay dominates the finite-precision floor defect·‖x‖.
            let quiet = simulate_coupled(
                &plant,
                &meas,
                &func,
                obs,
                Signal::Zero,
                &History::zeros(2),
                &History::ones(1),
                60.0,
                0.05,
            );
            match quiet {
                Ok(t) => c.le("example5/observer_decay", t.error_norm_at(60.0), 0.06),
                Err(e) => c.fail("example5/observer_decay_sim", e.to_string()),
            }
            // once the measurement horizon has filled (t ≥ h), the coupled
            // error must follow the autonomous error system exactly:
            // restart the reduced dynamics from the coupled history and
            // compare trajectories
            let active = simulate_coupled(
                &plant,
                &meas,
                &func,
                obs,
                Signal::Square { amplitude: 1.0, period: 8.0 },
                &History::ones(2),
                &History::zeros(1),
                14.0,
                0.05,
            );
            match active {
                Ok(t) => {
                    let err_sys = error_system(&plant, &meas, &func, obs).expect("decoupled");
                    let step = t.step;
                    let t0 = 4.0;
                    let samples = t.e.clone();
                    let hist = History::Func(std::sync::Arc::new(move |theta: f64| {
                        // linear interpolation between coupled grid samples
                        let pos = ((t0 + theta) / step).max(0.0);
                        let k = (pos.floor() as usize).min(samples.len() - 2);
                        let w = pos - k as f64;
                        samples[k]
                            .iter()
                            .zip(&samples[k + 1])
                            .map(|(a, b)| a * (1.0 - w) + b * w)
                            .collect()
                    }));
                    match simulate(&err_sys, &hist, 10.0, step) {
                        Ok(pred) => {
                            let mut dev = 0.0f64;
                            let mut scale = 1.0f64;
                            for k in 0..pred.states.len() {
                                let coupled_idx = ((t0 / step).round() as usize) + k;
                                let e_coupled = &t.e[coupled_idx.min(t.e.len() - 1)];
                                for (a, b) in pred.states[k].iter().zip(e_coupled) {
                                    dev = dev.max((a - b).abs());
                                    scale = scale.max(b.abs());
                                }
                            }
                            c.le("example5/coupled_matches_reduced", dev / scale, 1e-3);
                        }
                        Err(e) => c.fail("example5/reduced_sim", e.to_string()),
                    }
                }
                Err(e) => c.fail("example5/coupled_sim", e.to_string()),
            }
        }
        Err(e) => c.fail("example5/pinned_synthesis", e.to_string()),
    }

    // free two-delay search is certified
    match synthesize(&plant, &meas, &func, &SynthesisOptions::default(), cfg) {
        Ok(report) => c.le("example5/searched_abscissa", report.error_roots.abscissa, -1e-6),
        Err(e) => c.fail("example5/searched_synthesis", e.to_string()),
    }
    c.0
}

fn scenario_example6(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (plant, meas, func) = example6();
    c.is_true(
        "example6/rank_check",
        synthesis::two_delay_rank_check(&meas, &plant).unwrap_or(false),
    );

    let n_tau = Mat::from_rows(&[&[-0.3621, -1.0222], &[2.0430, -1.8944]]);
    let n_h = Mat::from_rows(&[&[-0.2399, 0.1801], &[-0.3589, 0.0293]]);
    let opts = SynthesisOptions {
        pinned_n_tau: Some(n_tau.clone()),
        pinned_n_h: Some(n_h.clone()),
        ..Default::default()
    };
    match synthesize(&plant, &meas, &func, &opts, cfg) {
        Ok(report) => {
            let obs = &report.observer;
            let gains =
                synthesis::two_delay_solve(&n_tau, &n_h, &func, &meas, &plant).expect("solvable");
            c.mat_close(
                "example6/xbar_row1",
                &gains.x_bar.block(0, 0, 1, 4),
                &Mat::row_vec(&[-0.1490, 0.0598, 1.0222, -0.1200]),
                2e-4,
            );
            c.mat_close(
                "example6/J_tau",
                &obs.j_tau,
                &Mat::col_vec(&[-1.0222, -1.8944]),
                2e-4,
            );
            c.le("example6/abscissa", report.error_roots.abscissa, -1e-6);
            let coeffs = error_coefficients(&plant, &meas, &func, obs).expect("consistent");
            c.le("example6/residual", coeffs.residual_norm, PRINTED_RESIDUAL_TOL);

            // pinned loop decays at abscissa ≈ −0.42; the horizon stays
            // short because the open-loop plant grows like e^(1.25 t) and
            // the coupled error is only meaningful above the
            // finite-precision floor defect·‖x‖
            let traj = simulate_coupled(
                &plant,
                &meas,
                &func,
                obs,
                Signal::Step { amplitude: 1.0 },
                &History::Constant(vec![0.5, -0.5]),
                &History::zeros(2),
                12.0,
                0.01,
            );
            match traj {
                Ok(t) => c.le("example6/coupled_error_tail", t.error_norm_at(12.0), 2e-2),
                Err(e) => c.fail("example6/coupled_sim", e.to_string()),
            }
        }
        Err(e) => c.fail("example6/pinned_synthesis", e.to_string()),
    }

    match synthesize(&plant, &meas, &func, &SynthesisOptions::default(), cfg) {
        Ok(report) => c.le("example6/searched_abscissa", report.error_roots.abscissa, -1e-6),
        Err(e) => c.fail("example6/searched_synthesis", e.to_string()),
    }
    c.0
}

fn scenario_example7(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (plant, meas, func) = example7();

    c.is_false("example7/rank_condition", synthesis::check_rank_condition(&func, &plant));

    // feedback gain places the closed-loop spectrum at {−0.5, −1}
    let f_gain = func.f.clone();
    let abf = plant.a.add_ref(&plant.b.matmul(&f_gain));
    let re = spectrum_sorted(&abf);
    c.approx("example7/abf_eig_low", re[0], -1.0, 1e-9);
    c.approx("example7/abf_eig_high", re[1], -0.5, 1e-9);

    let pinned_n_tau = Mat::from_rows(&[&[-0.5079, 0.1035], &[0.1217, -0.1952]]);
    let opts = SynthesisOptions {
        pinned_n_tau: Some(pinned_n_tau),
        augment_rows: Some(Mat::row_vec(&[0.0, 1.0])),
        ..Default::default()
    };
    match synthesize(&plant, &meas, &func, &opts, cfg) {
        Ok(report) => {
            c.is_true("example7/case3_taken", report.case == CaseTag::Case3AugmentThenRetry);
            c.is_true("example7/order", report.observer.order() == 2);
            c.mat_close(
                "example7/N",
                &report.observer.n,
                &Mat::from_rows(&[&[0.2833, -0.4583], &[-0.1667, -0.0833]]),
                2e-4,
            );
            c.mat_close(
                "example7/M",
                &report.observer.m,
                &Mat::col_vec(&[-0.9670, 0.4021]),
                2e-4,
            );
            c.mat_close(
                "example7/G",
                &report.observer.g,
                &Mat::col_vec(&[-0.7630, 0.2007]),
                2e-4,
            );
            c.mat_close(
                "example7/G_tau",
                &report.observer.g_tau,
                &Mat::col_vec(&[0.5327, -0.1962]),
                2e-4,
            );
            c.mat_close("example7/J", &report.observer.j, &Mat::col_vec(&[-1.7, 1.0]), 1e-12);
            c.le("example7/J_tau_zero", report.observer.j_tau.norm_max(), 1e-12);

            // closed-loop realizations
            let k = report.extraction.clone().expect("augmented");
            let (state_error, state_observer) = synthesis::closed_loop_systems(
                &plant,
                &meas,
                &report.functional,
                &report.observer,
                &k,
            )
            .expect("closed loop");
            // the state-error spectrum is the union of σ(A+BF) and the
            // error-system roots
            let se_roots = rightmost_roots(&state_error, 16).expect("roots");
            let err_sys = error_system(&plant, &meas, &report.functional, &report.observer)
                .expect("decoupled");
            let err_roots = rightmost_roots(&err_sys, 16).expect("roots");
            let mut union: Vec<(f64, f64)> = err_roots
                .roots
                .iter()
                .map(|z| (z.re, z.im))
                .chain([(-0.5, 0.0), (-1.0, 0.0)])
                .collect();
            union.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let mut union_ok = true;
            for root in se_roots.roots.iter().take(3) {
                let hit = union
                    .iter()
                    .any(|(re, im)| {
                        ((root.re - re).powi(2) + (root.im.abs() - im.abs()).powi(2)).sqrt() < 1e-4
                    });
                union_ok &= hit;
            }
            c.is_true("example7/state_error_union", union_ok);
            c.le("example7/state_error_abscissa", se_roots.abscissa, -1e-6);
            let so_roots = rightmost_roots(&state_observer, 16).expect("roots");
            c.le("example7/state_observer_abscissa", so_roots.abscissa, -1e-6);

            // closed-loop response to a step-like reference converges with a
            // bounded transient
            let traj = simulate_closed_loop(
                &plant,
                &meas,
                &report.functional,
                &report.observer,
                &k,
                Signal::Step { amplitude: 0.5 },
                &History::Constant(vec![0.4, -0.2]),
                &History::zeros(2),
                40.0,
                0.01,
            )
            .expect("simulation");
            c.le("example7/closed_loop_error_tail", traj.error_norm_at(40.0), 1e-3);
            let sup_x: f64 = traj
                .x
                .iter()
                .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            c.le("example7/closed_loop_bounded", sup_x, 50.0);
        }
        Err(e) => c.fail("example7/pinned_synthesis", e.to_string()),
    }

    // free search (greedy augmentation) also certifies
    match synthesize(&plant, &meas, &func, &SynthesisOptions::default(), cfg) {
        Ok(report) => c.le("example7/searched_abscissa", report.error_roots.abscissa, -1e-6),
        Err(e) => c.fail("example7/searched_synthesis", e.to_string()),
    }
    c.0
}

fn scenario_bench_constant(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (n, nt) = bench_system();
    let sweep = max_delay(
        "bench_constant",
        |tau| {
            lmi::stability_constant(&n, &nt, tau)
                .map(|p| solve(&p, cfg).is_feasible())
                .unwrap_or(false)
        },
        0.5,
        3.0,
        0.01,
    );
    match sweep {
        Ok(s) => c.approx("bench_constant/max_delay", s.certified_max_delay, 1.54, 0.02),
        Err(e) => c.fail("bench_constant/max_delay", e.to_string()),
    }
    c.0
}

fn scenario_bench_interval(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (n, nt) = bench_system();
    for (lo, hi) in [(0.2, 1.42), (0.3, 1.55), (0.5, 1.65), (0.8, 1.66), (1.2, 1.64)] {
        let feasible_at = |t: f64| {
            lmi::stability_interval(&n, &nt, lo, t)
                .map(|p| solve(&p, cfg).is_feasible())
                .unwrap_or(false)
        };
        let band = (0.05f64).max(0.05 * hi);
        c.is_true(&format!("bench_interval/feasible_{lo}_{hi}"), feasible_at(hi));
        c.is_false(
            &format!("bench_interval/infeasible_{lo}_above"),
            feasible_at(hi + band + 0.01),
        );
    }
    c.0
}

fn scenario_bench_interval_pd(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (n, nt) = bench_system();
    for (lo, hi) in [(0.2, 1.62), (0.5, 1.67)] {
        let feasible_at = |t: f64| {
            lmi::stability_interval_pd(&n, &nt, lo, t)
                .map(|p| solve(&p, cfg).is_feasible())
                .unwrap_or(false)
        };
        let band = (0.05f64).max(0.05 * hi);
        c.is_true(&format!("bench_interval_pd/feasible_{lo}_{hi}"), feasible_at(hi));
        c.is_false(
            &format!("bench_interval_pd/infeasible_{lo}_above"),
            feasible_at(hi + band + 0.01),
        );
    }
    // the parameter-dependent refinement is at least as strong as the plain
    // interval condition on every published row
    for (lo, plain_hi) in [(0.2, 1.42), (0.3, 1.55), (0.5, 1.65)] {
        let plain = lmi::stability_interval(&n, &nt, lo, plain_hi)
            .map(|p| solve(&p, cfg).is_feasible())
            .unwrap_or(false);
        let refined = lmi::stability_interval_pd(&n, &nt, lo, plain_hi)
            .map(|p| solve(&p, cfg).is_feasible())
            .unwrap_or(false);
        c.is_true(&format!("bench_interval_pd/dominates_{lo}"), refined || !plain);
    }
    c.0
}

fn scenario_bench_partitioned(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (n, nt) = bench_system();
    let zero = Mat::zeros(2, 2);
    let sweep = max_delay(
        "bench_partitioned",
        |tau| {
            lmi::stability_multi(&n, [&zero, &zero, &nt], [tau / 3.0, 2.0 * tau / 3.0, tau])
                .map(|p| solve(&p, cfg).is_feasible())
                .unwrap_or(false)
        },
        1.0,
        3.0,
        0.01,
    );
    match sweep {
        Ok(s) => c.approx("bench_partitioned/max_delay", s.certified_max_delay, 1.69, 0.02),
        Err(e) => c.fail("bench_partitioned/max_delay", e.to_string()),
    }
    c.0
}

fn scenario_bench_two_delay_stability(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let (n, nt) = bench_system();
    let nh = Mat::from_rows(&[&[0.0, 0.0], &[0.2, 0.0]]);
    let zero = Mat::zeros(2, 2);
    // published figure: h = 1.68 at τ = 1.2 (our assembly stays feasible
    // beyond; the check asserts feasibility at the printed point and that
    // the achieved bound is not lower)
    let feasible_at = |h: f64| {
        lmi::stability_multi(&n, [&zero, &nt, &nh], [0.6, 1.2, h])
            .map(|p| solve(&p, cfg).is_feasible())
            .unwrap_or(false)
    };
    c.is_true("bench_two_delay_stability/feasible_1.68", feasible_at(1.68));
    match max_delay("bench_two_delay_stability", feasible_at, 1.3, 3.0, 0.02) {
        Ok(s) => c.is_true(
            "bench_two_delay_stability/achieved_not_lower",
            s.certified_max_delay >= 1.68 * 0.9,
        ),
        Err(e) => c.fail("bench_two_delay_stability/sweep", e.to_string()),
    }
    c.0
}

fn scenario_bench_synth_constant(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let n = bench_unstable3();
    let fam = |tau: f64| SynthesisFamily::Constant { n: n.clone(), tau };
    let at = |tau: f64| find_gains(&fam(tau), cfg).map(|o| o.is_feasible()).unwrap_or(false);
    c.is_true("bench_synth_constant/feasible_4.8", at(4.8));
    c.is_false("bench_synth_constant/infeasible_5.52", at(5.52));
    let fam = SynthesisFamily::Interval { n: n.clone(), tau_lo: 2.0, tau_hi: 4.78 };
    c.is_true(
        "bench_synth_constant/interval_2_4.78",
        find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false),
    );
    c.0
}

fn scenario_bench_synth_structured(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let n = bench_unstable3();
    let z33 = Mat::zeros(3, 3);
    let z13 = Mat::zeros(1, 3);
    let row = Mat::row_vec(&[1.0, 2.0, 3.0]);
    let at = |tau: f64| {
        let fam = SynthesisFamily::StructuredConstant {
            n01: n.clone(),
            n02: z13.clone(),
            ntau1: z33.clone(),
            ntau2: row.clone(),
            tau,
        };
        find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false)
    };
    c.is_true("bench_synth_structured/feasible_2.2", at(2.2));
    c.is_false("bench_synth_structured/infeasible_2.53", at(2.53));
    let fam = SynthesisFamily::StructuredInterval {
        n01: n.clone(),
        n02: z13.clone(),
        ntau1: z33.clone(),
        ntau2: row.clone(),
        tau_lo: 1.0,
        tau_hi: 2.1,
    };
    c.is_true(
        "bench_synth_structured/interval_1_2.1",
        find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false),
    );
    c.0
}

fn scenario_bench_synth_two_delay(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    // scalar instance: two delayed feedback channels reach τ = 0.595
    // against 0.495 with a single channel
    let scalar_two = |tau: f64, h: f64| {
        let fam = SynthesisFamily::TwoDelay {
            n01: Mat::scalar(2.0),
            n02: Mat::scalar(0.0),
            ntau1: Mat::scalar(0.0),
            ntau2: Mat::scalar(1.0),
            nh1: Mat::scalar(0.0),
            nh2: Mat::scalar(1.0),
            tau,
            h,
        };
        find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false)
    };
    c.is_true("bench_synth_two_delay/scalar_0.595_0.8", scalar_two(0.595, 0.8));
    let scalar_single = |tau: f64| {
        let fam = SynthesisFamily::StructuredConstant {
            n01: Mat::scalar(2.0),
            n02: Mat::scalar(0.0),
            ntau1: Mat::scalar(0.0),
            ntau2: Mat::scalar(1.0),
            tau,
        };
        find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false)
    };
    c.is_true("bench_synth_two_delay/single_0.495", scalar_single(0.495));
    c.is_false("bench_synth_two_delay/single_0.595", scalar_single(0.595));

    // 3-state instance at the published pair
    let n = bench_unstable3();
    let z33 = Mat::zeros(3, 3);
    let z13 = Mat::zeros(1, 3);
    let row = Mat::row_vec(&[1.0, 2.0, 3.0]);
    let fam = SynthesisFamily::TwoDelay {
        n01: n,
        n02: z13,
        ntau1: z33.clone(),
        ntau2: row.clone(),
        nh1: z33,
        nh2: row,
        tau: 2.43,
        h: 2.7,
    };
    c.is_true(
        "bench_synth_two_delay/three_state_2.43_2.7",
        find_gains(&fam, cfg).map(|o| o.is_feasible()).unwrap_or(false),
    );
    c.0
}

fn scenario_bench_synth_three_delay(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let n = bench_unstable3();
    let z33 = Mat::zeros(3, 3);
    let row = Mat::row_vec(&[1.0, 2.0, 3.0]);
    let base = StructuredChannel { fixed: n, structured: Mat::zeros(1, 3) };
    let channels = vec![
        StructuredChannel { fixed: z33.clone(), structured: row.clone() },
        StructuredChannel { fixed: z33.clone(), structured: row },
        StructuredChannel { fixed: z33, structured: Mat::row_vec(&[1.0, 0.0, 0.0]) },
    ];
    let fam = SynthesisFamily::ThreeDelay { base, channels, taus: [3.65, 3.7, 3.75] };
    match find_gains(&fam, cfg) {
        Ok(out) => {
            c.is_true("bench_synth_three_delay/feasible", out.is_feasible());
            if let Some(a) = out.abscissa {
                c.le("bench_synth_three_delay/closed_loop_abscissa", a, -1e-9);
            }
        }
        Err(e) => c.fail("bench_synth_three_delay/search", e.to_string()),
    }
    c.0
}

/// Randomized decoupling suite: synthesized observers produce error
/// trajectories that ignore the input signal and decay at the certified
/// rate.
fn scenario_decoupling(cfg: &SolverConfig) -> Vec<Check> {
    let mut c = Checks::new();
    let mut rng = Rng::new(0x7dc0_1234_5678_9abc);
    let mut produced = 0usize;
    let mut attempts = 0usize;
    while produced < 20 && attempts < 200 {
        attempts += 1;
        let n_dim = 2 + (rng.next_u64() % 2) as usize;
        // scale so the plant is at most mildly unstable: the invariance
        // comparison needs bounded trajectories over the horizon
        let mut a = rng.mat(n_dim, n_dim);
        let spec = linalg::eig(&a).expect("square");
        let spread = spec.eigenvalues.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
        if spread > 0.3 {
            a = a.scale(0.3 / spread);
        }
        let b = rng.mat(n_dim, 1);
        let plant = match Plant::new(a, b) {
            Ok(p) => p,
            Err(_) => continue,
        };
        // dyadic delay: the step below divides it exactly, so composite
        // delays and delayed-input jumps land on grid nodes
        let tau = (64 + (rng.next_u64() % 65) as i64) as f64 / 128.0;
        let meas = match MeasurementModel::single(Mat::identity(n_dim), tau) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let m_dim = 1 + (rng.next_u64() as usize % n_dim);
        let func = match Functional::new(rng.mat(m_dim, n_dim)) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let report = match synthesize(&plant, &meas, &func, &SynthesisOptions::default(), cfg) {
            Ok(r) => r,
            Err(_) => continue,
        };
        // resample ill-conditioned draws whose assembly residual would
        // dominate the invariance comparison
        let residual = error_coefficients(&plant, &meas, &report.functional, &report.observer)
            .map(|c| c.residual_norm)
            .unwrap_or(f64::INFINITY);
        if residual > 1e-12 {
            continue;
        }
        produced += 1;
        let name = format!("decoupling/{produced:02}");

        let step = tau / 1024.0;
        let x_hist = History::Constant((0..n_dim).map(|_| rng.unit()).collect());
        let w_hist = History::Constant((0..report.observer.order()).map(|_| rng.unit()).collect());
        let run_to = |sig: Signal, t_end: f64| {
            simulate_coupled(
                &plant,
                &meas,
                &report.functional,
                &report.observer,
                sig,
                &x_hist,
                &w_hist,
                t_end,
                step,
            )
        };
        let run = |sig: Signal| run_to(sig, 10.0);
        // compare inputs whose discontinuities align with the grid start:
        // interior jumps would probe integrator accuracy, not decoupling
        match (run(Signal::Zero), run(Signal::Step { amplitude: 1.0 })) {
            (Ok(t0), Ok(t1)) => {
                let dev = t0
                    .e
                    .iter()
                    .zip(&t1.e)
                    .map(|(a, b)| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (x - y).abs())
                            .fold(0.0f64, f64::max)
                    })
                    .fold(0.0f64, f64::max);
                c.le(&format!("{name}/input_invariance"), dev, 1e-9);
            }
            _ => c.fail(&format!("{name}/simulation"), "integration failed".into()),
        }

        // tail decay at the certified rate, on the autonomous error system
        // (the coupled trajectory obeys the same dynamics once decoupled)
        let abscissa = report.error_roots.abscissa;
        let t_star = 10.0 / abscissa.abs();
        let err_sys = error_system(&plant, &meas, &report.functional, &report.observer)
            .expect("decoupled by construction");
        match simulate(&err_sys, &History::ones(err_sys.dim()), t_star, tau / 16.0) {
            Ok(t0) => c.le(&format!("{name}/tail_norm"), t0.norm_at(t_star), 1e-3),
            Err(_) => c.fail(&format!("{name}/tail_sim"), "integration failed".into()),
        }
    }
    c.is_true("decoupling/produced_20", produced == 20);
    c.0
}
