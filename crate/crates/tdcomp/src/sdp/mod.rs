//! Semidefinite feasibility engine over LMI problems, with bisection
//! sweeps for maximum-allowable-delay queries.
//!
//! Every `Feasible` verdict is backed by an independent eigenvalue recheck
//! of all constraint maps (margin at least ε/2); `NotFeasible` only claims
//! that no certificate was found. Stabilization problems carry a fixed
//! free-weighting scalar λ, so the front end line-searches a λ grid and
//! re-verifies extracted gains both by the matching stability condition and
//! by rightmost characteristic roots.

mod ipm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dde::{rightmost_roots, DdeSystem};
use crate::linalg::{self, Mat};
use crate::lmi::{
    self, LmiError, LmiProblem, StructuredChannel, Verdict, VerdictStatus,
};

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("no feasible point at the sweep start tau = {tau}")]
    NoFeasibleStart { tau: f64 },
    #[error("sweep bounds must satisfy 0 < lo < hi and tol > 0")]
    BadSweep,
    #[error("problem carries no gain extraction rule")]
    NotSynthesis,
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    LinAlg(#[from] linalg::LinAlgError),
}

/// Engine configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Floor for the strictness margin ε (the problem's own ε is used when
    /// larger).
    pub feasibility_margin: f64,
    /// Duality-gap / residual tolerance of the interior-point iteration.
    pub tolerance: f64,
    /// Free-weighting scalars tried in order by the synthesis front end.
    pub lambda_grid: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 120,
            feasibility_margin: 0.0,
            tolerance: 1e-9,
            lambda_grid: default_lambda_grid(),
        }
    }
}

/// Free-weighting scalars: quarter-decade positive steps from 1 to 1000,
/// then the sub-unit positives, zero, and a coarse negative tail.
///
/// The feasible λ window narrows sharply near a family's delay boundary
/// (quarter-decade resolution is needed there), strongly unstable dynamics
/// need λ up to a few hundred, and negative λ almost never wins — hence the
/// ordering.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = Vec::new();
    for k in 0..=12i32 {
        grid.push(10f64.powf(k as f64 / 4.0));
    }
    for k in (-4..0i32).rev() {
        grid.push(10f64.powf(k as f64 / 4.0));
    }
    grid.push(0.0);
    for k in [-4i32, -2, 0, 2, 4, 6, 8, 10, 12] {
        grid.push(-(10f64.powf(k as f64 / 4.0)));
    }
    grid
}

/// Decide feasibility of one LMI problem. The verdict's assignment and
/// margin come from the independent recheck, never from solver internals.
pub fn solve(problem: &LmiProblem, cfg: &SolverConfig) -> Verdict {
    let scal = ipm::scalarize(problem);
    let epsilon = problem.epsilon.max(cfg.feasibility_margin);
    let target = epsilon / 2.0;
    let assign_of = |x: &[f64]| -> Vec<Mat> {
        problem
            .vars
            .iter()
            .enumerate()
            .map(|(vi, v)| {
                let off = scal.var_offsets[vi];
                v.kind.assemble(&x[off..off + v.kind.scalar_count()])
            })
            .collect()
    };
    let cert = |x: &[f64]| -> f64 { ipm::assignment_margin(problem, &assign_of(x)) };
    let out = ipm::phase1(&scal, cfg.max_iterations, cfg.tolerance, &cert, target);
    let assign = assign_of(&out.x);
    let margin = ipm::assignment_margin(problem, &assign);
    let named: Vec<(String, Mat)> = problem
        .vars
        .iter()
        .zip(&assign)
        .map(|(v, m)| (v.name.clone(), m.clone()))
        .collect();
    let status = if margin >= target {
        VerdictStatus::Feasible
    } else {
        match out.status {
            ipm::Phase1Status::InfeasibleBound | ipm::Phase1Status::Converged => {
                VerdictStatus::NotFeasible
            }
            ipm::Phase1Status::Stalled if out.t > 0.0 => VerdictStatus::NotFeasible,
            _ => VerdictStatus::Inconclusive,
        }
    };
    Verdict { status, assignment: named, margin, gains: Vec::new(), iterations: out.iterations }
}

/// Solve a stabilization problem and extract its gains (`gain = X⁻¹G`).
/// Extraction fails when X is numerically singular; the caller then moves
/// to the next λ.
pub fn solve_synthesis(problem: &LmiProblem, cfg: &SolverConfig) -> Verdict {
    let mut verdict = solve(problem, cfg);
    if !verdict.is_feasible() {
        return verdict;
    }
    let Some(extraction) = &problem.extraction else {
        return verdict;
    };
    let x = &verdict.assignment[extraction.x_var].1;
    if linalg::cond_one(x) > 1e12 {
        verdict.status = VerdictStatus::NotFeasible;
        return verdict;
    }
    let mut gains = Vec::new();
    for (name, g_var) in &extraction.gains {
        let g = &verdict.assignment[*g_var].1;
        match linalg::solve(x, g) {
            Ok(gain) => gains.push((name.clone(), gain)),
            Err(_) => {
                verdict.status = VerdictStatus::NotFeasible;
                return verdict;
            }
        }
    }
    verdict.gains = gains;
    verdict
}

/// A delay-parameterized stabilization family: how to build the problem at
/// a fixed λ, how to compose the closed loop from extracted gains, and how
/// to re-verify it.
#[derive(Debug, Clone)]
pub enum SynthesisFamily {
    /// `ė = Ne + N_τ e(t−τ)` with free `N_τ`, constant delay.
    Constant { n: Mat, tau: f64 },
    /// Free `N_τ`, delay anywhere in `[tau_lo, tau_hi]`.
    Interval { n: Mat, tau_lo: f64, tau_hi: f64 },
    /// `N = N01 + Z N02`, `N_τ = Nτ1 + Z Nτ2`, constant delay.
    StructuredConstant { n01: Mat, n02: Mat, ntau1: Mat, ntau2: Mat, tau: f64 },
    /// Structured gains over a delay interval.
    StructuredInterval { n01: Mat, n02: Mat, ntau1: Mat, ntau2: Mat, tau_lo: f64, tau_hi: f64 },
    /// Two delayed channels at `τ < h`.
    TwoDelay {
        n01: Mat,
        n02: Mat,
        ntau1: Mat,
        ntau2: Mat,
        nh1: Mat,
        nh2: Mat,
        tau: f64,
        h: f64,
    },
    /// Three delayed channels at `τ₁ < τ₂ < τ₃`.
    ThreeDelay { base: StructuredChannel, channels: Vec<StructuredChannel>, taus: [f64; 3] },
}

impl SynthesisFamily {
    pub fn build(&self, lambda: f64) -> Result<LmiProblem, LmiError> {
        match self {
            SynthesisFamily::Constant { n, tau } => lmi::synth_constant(n, *tau, lambda),
            SynthesisFamily::Interval { n, tau_lo, tau_hi } => {
                lmi::synth_interval(n, *tau_lo, *tau_hi, lambda)
            }
            SynthesisFamily::StructuredConstant { n01, n02, ntau1, ntau2, tau } => {
                lmi::synth_structured_constant(n01, n02, ntau1, ntau2, *tau, lambda)
            }
            SynthesisFamily::StructuredInterval { n01, n02, ntau1, ntau2, tau_lo, tau_hi } => {
                lmi::synth_structured_interval(n01, n02, ntau1, ntau2, *tau_lo, *tau_hi, lambda)
            }
            SynthesisFamily::TwoDelay { n01, n02, ntau1, ntau2, nh1, nh2, tau, h } => {
                lmi::synth_two_delay(n01, n02, ntau1, ntau2, nh1, nh2, *tau, *h, lambda)
            }
            SynthesisFamily::ThreeDelay { base, channels, taus } => lmi::synth_three_delay(
                base,
                [&channels[0], &channels[1], &channels[2]],
                *taus,
                lambda,
            ),
        }
    }

    /// Closed-loop error systems implied by a gain set, one per delay value
    /// that must be checked (interval families sample lo, mid, hi).
    pub fn closed_loops(&self, gains: &[(String, Mat)]) -> Result<Vec<DdeSystem>, SdpError> {
        let gain = |name: &str| -> &Mat {
            gains
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m)
                .expect("extraction produced this gain")
        };
        let sys = |n: &Mat, delayed: Vec<(Mat, f64)>| -> Result<DdeSystem, SdpError> {
            DdeSystem::new(n.clone(), delayed)
                .map_err(|e| SdpError::Lmi(LmiError::Dimension(e.to_string())))
        };
        match self {
            SynthesisFamily::Constant { n, tau } => {
                Ok(vec![sys(n, vec![(gain("N_tau").clone(), *tau)])?])
            }
            SynthesisFamily::Interval { n, tau_lo, tau_hi } => {
                let nt = gain("N_tau").clone();
                [*tau_lo, 0.5 * (tau_lo + tau_hi), *tau_hi]
                    .iter()
                    .map(|&t| sys(n, vec![(nt.clone(), t)]))
                    .collect()
            }
            SynthesisFamily::StructuredConstant { n01, n02, ntau1, ntau2, tau } => {
                let z = gain("Z");
                let ncl = n01.add_ref(&z.matmul(n02));
                let ntcl = ntau1.add_ref(&z.matmul(ntau2));
                Ok(vec![sys(&ncl, vec![(ntcl, *tau)])?])
            }
            SynthesisFamily::StructuredInterval { n01, n02, ntau1, ntau2, tau_lo, tau_hi } => {
                let z = gain("Z");
                let ncl = n01.add_ref(&z.matmul(n02));
                let ntcl = ntau1.add_ref(&z.matmul(ntau2));
                [*tau_lo, 0.5 * (tau_lo + tau_hi), *tau_hi]
                    .iter()
                    .map(|&t| sys(&ncl, vec![(ntcl.clone(), t)]))
                    .collect()
            }
            SynthesisFamily::TwoDelay { n01, n02, ntau1, ntau2, nh1, nh2, tau, h } => {
                let ncl = n01.add_ref(&gain("Z0").matmul(n02));
                let ntcl = ntau1.add_ref(&gain("Z_tau").matmul(ntau2));
                let nhcl = nh1.add_ref(&gain("Z_h").matmul(nh2));
                Ok(vec![sys(&ncl, vec![(ntcl, *tau), (nhcl, *h)])?])
            }
            SynthesisFamily::ThreeDelay { base, channels, taus } => {
                let ncl = base.fixed.add_ref(&gain("Z0").matmul(&base.structured));
                let delayed = vec![
                    (channels[0].fixed.add_ref(&gain("Z1").matmul(&channels[0].structured)), taus[0]),
                    (channels[1].fixed.add_ref(&gain("Z2").matmul(&channels[1].structured)), taus[1]),
                    (channels[2].fixed.add_ref(&gain("Z3").matmul(&channels[2].structured)), taus[2]),
                ];
                Ok(vec![sys(&ncl, delayed)?])
            }
        }
    }

    /// The matching stability condition for re-verifying extracted gains.
    fn verification_problems(&self, gains: &[(String, Mat)]) -> Result<Vec<LmiProblem>, SdpError> {
        let loops = self.closed_loops(gains)?;
        match self {
            SynthesisFamily::Constant { .. } | SynthesisFamily::StructuredConstant { .. } => {
                // same τ/3 partition the synthesis condition used
                let cl = &loops[0];
                let (nt, tau) = (&cl.delayed()[0].0, cl.delayed()[0].1);
                let zero = Mat::zeros(nt.rows(), nt.cols());
                Ok(vec![lmi::stability_multi(
                    cl.a0(),
                    [&zero, &zero, nt],
                    [tau / 3.0, 2.0 * tau / 3.0, tau],
                )?])
            }
            SynthesisFamily::Interval { tau_lo, tau_hi, .. }
            | SynthesisFamily::StructuredInterval { tau_lo, tau_hi, .. } => {
                let cl = &loops[0];
                let nt = &cl.delayed()[0].0;
                Ok(vec![lmi::stability_interval(cl.a0(), nt, *tau_lo, *tau_hi)?])
            }
            SynthesisFamily::TwoDelay { tau, h, .. } => {
                let cl = &loops[0];
                let nt = &cl.delayed()[0].0;
                let nh = &cl.delayed()[1].0;
                let zero = Mat::zeros(nt.rows(), nt.cols());
                Ok(vec![lmi::stability_multi(
                    cl.a0(),
                    [&zero, nt, nh],
                    [tau / 2.0, *tau, *h],
                )?])
            }
            SynthesisFamily::ThreeDelay { taus, .. } => {
                let cl = &loops[0];
                Ok(vec![lmi::stability_multi(
                    cl.a0(),
                    [&cl.delayed()[0].0, &cl.delayed()[1].0, &cl.delayed()[2].0],
                    *taus,
                )?])
            }
        }
    }
}

/// Result of a λ-grid synthesis search.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub verdict: Verdict,
    /// λ value that produced the certificate.
    pub lambda: Option<f64>,
    /// Rightmost closed-loop abscissa over all checked delay values.
    pub abscissa: Option<f64>,
}

impl SynthesisOutcome {
    pub fn is_feasible(&self) -> bool {
        self.verdict.is_feasible()
    }
}

/// Search the λ grid for a stabilizing gain set. A gain set is accepted
/// only when (a) its extraction succeeded, (b) the matching stability
/// condition holds for the composed closed loop, and (c) every closed-loop
/// rightmost characteristic root is strictly negative.
pub fn find_gains(family: &SynthesisFamily, cfg: &SolverConfig) -> Result<SynthesisOutcome, SdpError> {
    let mut last = None;
    for &lambda in &cfg.lambda_grid {
        let problem = family.build(lambda)?;
        let verdict = solve_synthesis(&problem, cfg);
        if !verdict.is_feasible() {
            last = Some(verdict);
            continue;
        }
        // independent re-verification of the extracted gain set
        let loops = family.closed_loops(&verdict.gains)?;
        let mut abscissa = f64::NEG_INFINITY;
        let mut roots_ok = true;
        for cl in &loops {
            let report = rightmost_roots(cl, 16).map_err(|e| {
                SdpError::Lmi(LmiError::Dimension(format!("root check: {e}")))
            })?;
            abscissa = abscissa.max(report.abscissa);
            if report.abscissa >= 0.0 {
                roots_ok = false;
            }
        }
        let lmi_ok = roots_ok
            && family
                .verification_problems(&verdict.gains)?
                .iter()
                .all(|p| solve(p, cfg).is_feasible());
        if roots_ok && lmi_ok {
            return Ok(SynthesisOutcome { verdict, lambda: Some(lambda), abscissa: Some(abscissa) });
        }
        last = Some(verdict);
    }
    let mut verdict = last.unwrap_or(Verdict {
        status: VerdictStatus::NotFeasible,
        assignment: Vec::new(),
        margin: f64::NEG_INFINITY,
        gains: Vec::new(),
        iterations: 0,
    });
    if verdict.is_feasible() {
        // feasible LMI whose gains failed re-verification: report not found
        verdict.status = VerdictStatus::NotFeasible;
    }
    Ok(SynthesisOutcome { verdict, lambda: None, abscissa: None })
}

/// Certified maximum-delay query result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelaySweepResult {
    pub query: String,
    pub certified_max_delay: f64,
    /// Probed delays and their feasibility, in probe order.
    pub trace: Vec<(f64, bool)>,
}

/// Bisection for the largest feasible delay of a monotone family. The
/// probe must be feasible at `tau_lo`; the result is certified feasible at
/// `certified_max_delay` and not found feasible within `tol` above it.
pub fn max_delay<F: FnMut(f64) -> bool>(
    query: &str,
    mut probe: F,
    tau_lo: f64,
    tau_hi: f64,
    tol: f64,
) -> Result<DelaySweepResult, SdpError> {
    if !(tau_lo > 0.0 && tau_hi > tau_lo && tol > 0.0) {
        return Err(SdpError::BadSweep);
    }
    let mut trace = Vec::new();
    let mut run = |t: f64, trace: &mut Vec<(f64, bool)>| -> bool {
        let ok = probe(t);
        trace.push((t, ok));
        ok
    };
    if !run(tau_lo, &mut trace) {
        return Err(SdpError::NoFeasibleStart { tau: tau_lo });
    }
    let mut lo = tau_lo;
    let mut hi = tau_hi;
    if run(tau_hi, &mut trace) {
        return Ok(DelaySweepResult { query: query.into(), certified_max_delay: tau_hi, trace });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if run(mid, &mut trace) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DelaySweepResult { query: query.into(), certified_max_delay: lo, trace })
}

/// Grid sweep for families whose feasibility is not monotone in the swept
/// parameter (interval-delay conditions): returns the largest feasible grid
/// point with the full trace.
pub fn sweep_grid<F: FnMut(f64) -> bool>(
    query: &str,
    mut probe: F,
    grid: &[f64],
) -> Result<DelaySweepResult, SdpError> {
    if grid.is_empty() {
        return Err(SdpError::BadSweep);
    }
    let mut trace = Vec::new();
    let mut best = None;
    for &t in grid {
        let ok = probe(t);
        trace.push((t, ok));
        if ok {
            best = Some(t);
        }
    }
    match best {
        Some(b) => Ok(DelaySweepResult { query: query.into(), certified_max_delay: b, trace }),
        None => Err(SdpError::NoFeasibleStart { tau: grid[0] }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn hurwitz_scalar_is_feasible() {
        let p = lmi::stability_constant(&Mat::scalar(-1.0), &Mat::scalar(0.0), 1.0).unwrap();
        let v = solve(&p, &quick_cfg());
        assert!(v.is_feasible(), "margin {}", v.margin);
        assert!(v.margin > 0.0);
    }

    #[test]
    fn unstable_scalar_is_not_feasible() {
        let p = lmi::stability_constant(&Mat::scalar(1.0), &Mat::scalar(0.0), 1.0).unwrap();
        let v = solve(&p, &quick_cfg());
        assert!(!v.is_feasible());
    }

    #[test]
    fn scalar_design_delay_is_certified() {
        // ė = 0.5e − 0.7e(t−1) is asymptotically stable
        let p = lmi::stability_constant(&Mat::scalar(0.5), &Mat::scalar(-0.7), 1.0).unwrap();
        let v = solve(&p, &quick_cfg());
        assert!(v.is_feasible(), "margin {}", v.margin);
    }

    #[test]
    fn exhausted_budget_is_inconclusive_not_infeasible() {
        let p = lmi::stability_constant(&Mat::scalar(-1.0), &Mat::scalar(0.0), 1.0).unwrap();
        let cfg = SolverConfig { max_iterations: 1, ..SolverConfig::default() };
        let v = solve(&p, &cfg);
        assert_eq!(v.status, VerdictStatus::Inconclusive);
    }

    #[test]
    fn sweep_needs_a_feasible_start() {
        let err = max_delay("start", |_| false, 0.5, 2.0, 0.1);
        assert!(matches!(err, Err(SdpError::NoFeasibleStart { .. })));
        assert!(matches!(
            max_delay("bad", |_| true, 1.0, 0.5, 0.1),
            Err(SdpError::BadSweep)
        ));
    }

    #[test]
    fn grid_sweep_reports_largest_feasible_point() {
        let sweep = sweep_grid("grid", |t| t < 1.25, &[0.5, 1.0, 1.2, 1.5, 2.0]).unwrap();
        assert_eq!(sweep.certified_max_delay, 1.2);
        assert_eq!(sweep.trace.len(), 5);
    }
}
