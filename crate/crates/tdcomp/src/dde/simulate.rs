use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DdeError, DdeSystem, Signal};
use crate::linalg::Mat;
use crate::model::{Functional, FunctionalObserver, MeasurementModel, Plant};

/// Initial segment: the state on `[−τ_max, 0]`.
#[derive(Clone)]
pub enum History {
    Constant(Vec<f64>),
    Func(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl History {
    pub fn ones(dim: usize) -> History {
        History::Constant(vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> History {
        History::Constant(vec![0.0; dim])
    }

    fn value(&self, t: f64) -> Vec<f64> {
        match self {
            History::Constant(v) => v.clone(),
            History::Func(f) => f(t),
        }
    }

    fn dim_of(&self, probe_t: f64) -> usize {
        self.value(probe_t).len()
    }
}

impl std::fmt::Debug for History {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            History::Constant(v) => write!(f, "History::Constant({v:?})"),
            History::Func(_) => write!(f, "History::Func(..)"),
        }
    }
}

/// Uniform-grid solution record with dense (cubic Hermite) evaluation
/// between grid points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub step: f64,
    #[serde(skip)]
    derivs_right: Vec<Vec<f64>>,
    #[serde(skip)]
    derivs_left: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("nonempty trajectory")
    }

    pub fn state_at(&self, t: f64) -> &[f64] {
        let idx = ((t / self.step).round() as usize).min(self.states.len() - 1);
        &self.states[idx]
    }

    /// Dense evaluation at any `t` in `[0, t_end]`, using the stored stage
    /// derivatives; falls back to the nearest grid point when derivative
    /// data is unavailable (e.g. after deserialization).
    pub fn dense_at(&self, t: f64) -> Vec<f64> {
        if self.derivs_right.len() != self.states.len() {
            return self.state_at(t).to_vec();
        }
        let h = self.step;
        let k = ((t / h).floor() as usize).min(self.states.len().saturating_sub(2));
        let theta = ((t - k as f64 * h) / h).clamp(0.0, 1.0);
        hermite_eval(
            &self.states[k],
            &self.derivs_right[k],
            &self.states[k + 1],
            &self.derivs_left[k + 1],
            h,
            theta,
        )
    }

    /// Euclidean norm of the state at the grid point nearest `t`.
    pub fn norm_at(&self, t: f64) -> f64 {
        self.state_at(t).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest state norm over the window `[t0, t1]`.
    pub fn sup_norm(&self, t0: f64, t1: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .map(|(_, x)| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Classical 4-stage Runge–Kutta over one delay interval at a time, with
/// cubic Hermite dense output for delayed-state lookups.
struct Integrator<'a> {
    sys: &'a DdeSystem,
    history: &'a History,
    step: f64,
    states: Vec<Vec<f64>>,
    /// Right-sided derivative at each node (start of the next segment).
    derivs_right: Vec<Vec<f64>>,
    /// Left-sided derivative at each node (end of the previous segment);
    /// differs from the right one only across forcing jumps.
    derivs_left: Vec<Vec<f64>>,
}

impl<'a> Integrator<'a> {
    fn lookup(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            return self.history.value(t);
        }
        let h = self.step;
        let k = (t / h).floor() as usize;
        let k = k.min(self.states.len().saturating_sub(2));
        let theta = (t - k as f64 * h) / h;
        if theta.abs() < 1e-13 {
            return self.states[k].clone();
        }
        hermite_eval(
            &self.states[k],
            &self.derivs_right[k],
            &self.states[k + 1],
            &self.derivs_left[k + 1],
            h,
            theta,
        )
    }

    /// Right-hand side at a stage time. `seg_end`, when set, marks the right
    /// end of the current integration segment: signals are right-continuous,
    /// so forcing at the segment end samples the left limit. With jump times
    /// aligned to the grid this integrates piecewise-constant inputs exactly.
    fn rhs(&self, t: f64, x: &[f64], seg_end: Option<f64>) -> Vec<f64> {
        let n = self.sys.dim();
        let mut dx = vec![0.0; n];
        mat_vec_acc(self.sys.a0(), x, &mut dx);
        for (a, d) in self.sys.delayed() {
            let xd = self.lookup(t - d);
            mat_vec_acc(a, &xd, &mut dx);
        }
        if let Some(f) = self.sys.forcing() {
            let tq = match seg_end {
                Some(b) if t >= b => t - self.step * 1e-9,
                _ => t,
            };
            let r = f.b0.cols();
            let mut u = vec![0.0; r];
            fill_signal(&f.signal, tq, &mut u);
            mat_vec_acc(&f.b0, &u, &mut dx);
            for (b, d) in &f.delayed {
                fill_signal(&f.signal, tq - d, &mut u);
                mat_vec_acc(b, &u, &mut dx);
            }
        }
        dx
    }

    fn run(&mut self, steps: usize) -> Result<(), DdeError> {
        let h = self.step;
        for k in 0..steps {
            let t = k as f64 * h;
            let b = t + h;
            let x = self.states[k].clone();
            let k1 = self.rhs(t, &x, Some(b));
            let k2 = self.rhs(t + 0.5 * h, &add_scaled(&x, 0.5 * h, &k1), Some(b));
            let k3 = self.rhs(t + 0.5 * h, &add_scaled(&x, 0.5 * h, &k2), Some(b));
            let k4 = self.rhs(b, &add_scaled(&x, h, &k3), Some(b));
            let next: Vec<f64> = (0..x.len())
                .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            if next.iter().any(|v| !v.is_finite()) {
                return Err(DdeError::Diverged { t: b });
            }
            // one-sided derivatives: the left one closes this segment, the
            // right one opens the next (they differ across forcing jumps)
            let f_left = self.rhs(b, &next, Some(b));
            let f_right = self.rhs(b, &next, None);
            self.states.push(next);
            self.derivs_left.push(f_left);
            self.derivs_right.push(f_right);
        }
        Ok(())
    }
}

/// Cubic Hermite basis evaluation on one segment.
fn hermite_eval(x0: &[f64], f0: &[f64], x1: &[f64], f1: &[f64], h: f64, theta: f64) -> Vec<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    (0..x0.len())
        .map(|i| h00 * x0[i] + h * h10 * f0[i] + h01 * x1[i] + h * h11 * f1[i])
        .collect()
}

fn mat_vec_acc(a: &Mat, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.cols(), x.len());
    for i in 0..a.rows() {
        let row = a.row(i);
        let mut s = 0.0;
        for (aij, xj) in row.iter().zip(x) {
            s += aij * xj;
        }
        out[i] += s;
    }
}

fn fill_signal(sig: &Signal, t: f64, u: &mut [f64]) {
    let v = sig.value(t);
    for e in u.iter_mut() {
        *e = v;
    }
}

fn add_scaled(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

fn validate_grid(sys: &DdeSystem, t_end: f64, step: f64) -> Result<usize, DdeError> {
    if !(step > 0.0) || !step.is_finite() || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(DdeError::BadGrid);
    }
    if let Some(dmin) = sys.min_delay() {
        let limit = dmin / 4.0;
        if step > limit * (1.0 + 1e-12) {
            return Err(DdeError::StepTooLarge { step, limit });
        }
    }
    Ok((t_end / step).ceil() as usize)
}

/// Integrate `sys` from the given history over `[0, t_end]`.
pub fn simulate(
    sys: &DdeSystem,
    history: &History,
    t_end: f64,
    step: f64,
) -> Result<Trajectory, DdeError> {
    let steps = validate_grid(sys, t_end, step)?;
    if history.dim_of(0.0) != sys.dim() {
        return Err(DdeError::BadHistory);
    }
    let x0 = history.value(0.0);
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(DdeError::BadHistory);
    }
    let mut integ = Integrator {
        sys,
        history,
        step,
        states: vec![x0],
        derivs_right: Vec::new(),
        derivs_left: Vec::new(),
    };
    let f0 = integ.rhs(0.0, &integ.states[0].clone(), None);
    integ.derivs_right.push(f0.clone());
    integ.derivs_left.push(f0);
    integ.run(steps)?;
    let times = (0..=steps).map(|k| k as f64 * step).collect();
    Ok(Trajectory {
        times,
        states: integ.states,
        step,
        derivs_right: integ.derivs_right,
        derivs_left: integ.derivs_left,
    })
}

/// Joint plant–observer record. `zhat` is the functional estimate
/// `w + My` (extracted through `K` in closed-loop mode) and `e` is the
/// estimation error `ẑ − Fx`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub zhat: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub step: f64,
}

impl CoupledTrajectory {
    pub fn error_norm_at(&self, t: f64) -> f64 {
        let idx = ((t / self.step).round() as usize).min(self.e.len() - 1);
        self.e[idx].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_error_norm(&self) -> f64 {
        self.e
            .iter()
            .map(|e| e.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

struct CoupledParts {
    combined: DdeSystem,
    n_states: usize,
}

/// Stack plant and observer into one forced DDE in the joint state (x, w).
///
/// Output substitution turns `G y(t)` into `G C_τ x(t−τ)` and so on, which
/// introduces the composite delays 2τ, τ+h and 2h.
fn check_observer(
    plant: &Plant,
    meas: &MeasurementModel,
    obs: &FunctionalObserver,
) -> Result<(), DdeError> {
    if obs.is_two_delay() != meas.is_two_delay() {
        return Err(DdeError::Dimension(
            "observer delay structure does not match the measurement model".into(),
        ));
    }
    if obs.m.cols() != meas.output_dim() {
        return Err(DdeError::Dimension("observer output width vs measurement".into()));
    }
    if obs.j.cols() != plant.input_dim() {
        return Err(DdeError::Dimension("observer input width vs plant".into()));
    }
    if meas.state_dim() != plant.state_dim() {
        return Err(DdeError::Dimension("measurement width vs plant order".into()));
    }
    Ok(())
}

fn build_open_loop(
    plant: &Plant,
    meas: &MeasurementModel,
    obs: &FunctionalObserver,
    input: Signal,
) -> Result<CoupledParts, DdeError> {
    check_observer(plant, meas, obs)?;
    let n = plant.state_dim();
    let m = obs.order();
    let dim = n + m;
    let r = plant.input_dim();

    let mut a0 = Mat::zeros(dim, dim);
    a0.set_block(0, 0, &plant.a);
    a0.set_block(n, n, &obs.n);

    let mut delayed: Vec<(Mat, f64)> = Vec::new();
    let mut push = |mat: Mat, d: f64| {
        if mat.norm_max() > 0.0 {
            delayed.push((mat, d));
        }
    };

    let channels: Vec<(&Mat, f64)> = match meas {
        MeasurementModel::Single { c_tau, tau } => vec![(c_tau, *tau)],
        MeasurementModel::TwoDelay { c_tau, c_h, tau, h } => vec![(c_tau, *tau), (c_h, *h)],
    };

    // internal observer delays
    let mut at_tau = Mat::zeros(dim, dim);
    at_tau.set_block(n, n, &obs.n_tau);
    push(at_tau, obs.tau);
    if let (Some(n_h), Some(h)) = (&obs.n_h, obs.h) {
        let mut at_h = Mat::zeros(dim, dim);
        at_h.set_block(n, n, n_h);
        push(at_h, h);
    }

    // measurement feed-through: gains applied to y(t), y(t−τ), y(t−h)
    let mut gain_delays: Vec<(&Mat, f64)> = vec![(&obs.g, 0.0), (&obs.g_tau, obs.tau)];
    if let (Some(g_h), Some(h)) = (&obs.g_h, obs.h) {
        gain_delays.push((g_h, h));
    }
    for (gain, gd) in gain_delays {
        for (c, cd) in &channels {
            let mut blockm = Mat::zeros(dim, dim);
            blockm.set_block(n, 0, &gain.matmul(c));
            push(blockm, gd + cd);
        }
    }

    // forcing: u enters the plant directly and the observer through J blocks
    let mut b0 = Mat::zeros(dim, r);
    b0.set_block(0, 0, &plant.b);
    b0.set_block(n, 0, &obs.j);
    let mut fdelayed = Vec::new();
    let mut jt = Mat::zeros(dim, r);
    jt.set_block(n, 0, &obs.j_tau);
    if jt.norm_max() > 0.0 {
        fdelayed.push((jt, obs.tau));
    }
    if let (Some(j_h), Some(h)) = (&obs.j_h, obs.h) {
        let mut jh = Mat::zeros(dim, r);
        jh.set_block(n, 0, j_h);
        if jh.norm_max() > 0.0 {
            fdelayed.push((jh, h));
        }
    }

    let combined = DdeSystem::new(a0, delayed)?
        .with_forcing(super::Forcing { b0, delayed: fdelayed, signal: input })?;
    Ok(CoupledParts { combined, n_states: n })
}

fn observe(
    meas: &MeasurementModel,
    integ_states: &Trajectory,
    x_history: &History,
    n: usize,
    t: f64,
) -> Vec<f64> {
    // y(t) from delayed x, evaluated densely so delays need not align with
    // the step grid
    let x_at = |tq: f64| -> Vec<f64> {
        if tq <= 0.0 {
            x_history.value(tq)
        } else {
            let mut v = integ_states.dense_at(tq);
            v.truncate(n);
            v
        }
    };
    match meas {
        MeasurementModel::Single { c_tau, tau } => {
            let xd = x_at(t - tau);
            mat_vec(c_tau, &xd)
        }
        MeasurementModel::TwoDelay { c_tau, c_h, tau, h } => {
            let m1 = mat_vec(c_tau, &x_at(t - tau));
            let m2 = mat_vec(c_h, &x_at(t - h));
            m1.iter().zip(&m2).map(|(a, b)| a + b).collect()
        }
    }
}

fn mat_vec(a: &Mat, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.rows()];
    mat_vec_acc(a, x, &mut out);
    out
}

/// Co-integrate plant and observer under the given input signal and report
/// state, estimate, measurement, and estimation-error trajectories.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupled(
    plant: &Plant,
    meas: &MeasurementModel,
    func: &Functional,
    obs: &FunctionalObserver,
    input: Signal,
    x_history: &History,
    w_history: &History,
    t_end: f64,
    step: f64,
) -> Result<CoupledTrajectory, DdeError> {
    let parts = build_open_loop(plant, meas, obs, input)?;
    let n = parts.n_states;
    let xh = x_history.clone();
    let wh = w_history.clone();
    if xh.dim_of(0.0) != n || wh.dim_of(0.0) != obs.order() {
        return Err(DdeError::BadHistory);
    }
    let joint = History::Func(Arc::new(move |t| {
        let mut v = xh.value(t);
        v.extend(wh.value(t));
        v
    }));
    let traj = simulate(&parts.combined, &joint, t_end, step)?;
    split_coupled(traj, plant, meas, func, obs, x_history, None)
}

/// Closed-loop realization: the control input is the extracted estimate,
/// `u = K w + K M y + r`, with `r` the reference signal.
#[allow(clippy::too_many_arguments)]
pub fn simulate_closed_loop(
    plant: &Plant,
    meas: &MeasurementModel,
    func_aug: &Functional,
    obs: &FunctionalObserver,
    k: &Mat,
    reference: Signal,
    x_history: &History,
    w_history: &History,
    t_end: f64,
    step: f64,
) -> Result<CoupledTrajectory, DdeError> {
    check_observer(plant, meas, obs)?;
    let n = plant.state_dim();
    let m = obs.order();
    let dim = n + m;
    let r = plant.input_dim();
    if k.rows() != r || k.cols() != m {
        return Err(DdeError::Dimension("extraction matrix vs input/order".into()));
    }
    let (c_tau, tau) = match meas {
        MeasurementModel::Single { c_tau, tau } => (c_tau, *tau),
        MeasurementModel::TwoDelay { .. } => {
            return Err(DdeError::Dimension(
                "closed-loop realization is defined for single-delay measurements".into(),
            ))
        }
    };

    // u = Kw + KMy + r substituted into both the plant and the observer:
    //   ẋ = Ax + BKw + BKM C x(t−τ) + Br
    //   ẇ = (N+JK)w + (N_τ+J_τK)w(t−τ) + (G+JKM)C x(t−τ)
    //       + (G_τ+J_τKM)C x(t−2τ) + Jr + J_τ r(t−τ)
    let km = k.matmul(&obs.m);
    let n_t = obs.n.add_ref(&obs.j.matmul(k));
    let n_tau_t = obs.n_tau.add_ref(&obs.j_tau.matmul(k));
    let g_t = obs.g.add_ref(&obs.j.matmul(&km));
    let g_tau_t = obs.g_tau.add_ref(&obs.j_tau.matmul(&km));

    let mut a0 = Mat::zeros(dim, dim);
    a0.set_block(0, 0, &plant.a);
    a0.set_block(0, n, &plant.b.matmul(k));
    a0.set_block(n, n, &n_t);

    let mut at_tau = Mat::zeros(dim, dim);
    at_tau.set_block(0, 0, &plant.b.matmul(&km).matmul(c_tau));
    at_tau.set_block(n, 0, &g_t.matmul(c_tau));
    at_tau.set_block(n, n, &n_tau_t);

    let mut at_2tau = Mat::zeros(dim, dim);
    at_2tau.set_block(n, 0, &g_tau_t.matmul(c_tau));

    let mut delayed = vec![(at_tau, tau)];
    if at_2tau.norm_max() > 0.0 {
        delayed.push((at_2tau, 2.0 * tau));
    }

    let mut b0 = Mat::zeros(dim, r);
    b0.set_block(0, 0, &plant.b);
    b0.set_block(n, 0, &obs.j);
    let mut jt = Mat::zeros(dim, r);
    jt.set_block(n, 0, &obs.j_tau);
    let fdelayed = if jt.norm_max() > 0.0 { vec![(jt, tau)] } else { Vec::new() };

    let combined = DdeSystem::new(a0, delayed)?
        .with_forcing(super::Forcing { b0, delayed: fdelayed, signal: reference })?;

    let xh = x_history.clone();
    let wh = w_history.clone();
    if xh.dim_of(0.0) != n || wh.dim_of(0.0) != m {
        return Err(DdeError::BadHistory);
    }
    let joint = History::Func(Arc::new(move |t| {
        let mut v = xh.value(t);
        v.extend(wh.value(t));
        v
    }));
    let traj = simulate(&combined, &joint, t_end, step)?;
    split_coupled(traj, plant, meas, func_aug, obs, x_history, Some(k))
}

fn split_coupled(
    traj: Trajectory,
    plant: &Plant,
    meas: &MeasurementModel,
    func: &Functional,
    obs: &FunctionalObserver,
    x_history: &History,
    extraction: Option<&Mat>,
) -> Result<CoupledTrajectory, DdeError> {
    let n = plant.state_dim();
    let m = obs.order();
    let mut x_all = Vec::with_capacity(traj.states.len());
    let mut w_all = Vec::with_capacity(traj.states.len());
    let mut y_all = Vec::with_capacity(traj.states.len());
    let mut z_all = Vec::with_capacity(traj.states.len());
    let mut e_all = Vec::with_capacity(traj.states.len());
    for (idx, state) in traj.states.iter().enumerate() {
        let t = traj.times[idx];
        let x = state[..n].to_vec();
        let w = state[n..n + m].to_vec();
        let y = observe(meas, &traj, x_history, n, t);
        let my = mat_vec(&obs.m, &y);
        let zaug: Vec<f64> = w.iter().zip(&my).map(|(a, b)| a + b).collect();
        let zhat = match extraction {
            Some(k) => mat_vec(k, &zaug),
            None => zaug.clone(),
        };
        let fx = mat_vec(&func.f, &x);
        let e: Vec<f64> = zaug.iter().zip(&fx).map(|(a, b)| a - b).collect();
        x_all.push(x);
        w_all.push(w);
        y_all.push(y);
        z_all.push(zhat);
        e_all.push(e);
    }
    Ok(CoupledTrajectory {
        times: traj.times,
        x: x_all,
        w: w_all,
        y: y_all,
        zhat: z_all,
        e: e_all,
        step: traj.step,
    })
}


#[cfg(test)]
mod coupled_tests {
    use super::*;
    use crate::model::Functional;

    fn scalar_design() -> (Plant, MeasurementModel, Functional, FunctionalObserver) {
        let plant = Plant::new(
            Mat::from_rows(&[&[0.1, 1.0], &[0.0, 0.5]]),
            Mat::col_vec(&[1.0, 2.0]),
        )
        .unwrap();
        let meas = MeasurementModel::single(Mat::row_vec(&[1.0, 0.0]), 1.0).unwrap();
        let func = Functional::new(Mat::row_vec(&[0.0, 1.0])).unwrap();
        let obs = FunctionalObserver::single(
            Mat::scalar(0.7),
            Mat::scalar(0.5),
            Mat::scalar(-0.7),
            Mat::scalar(0.28),
            Mat::scalar(-0.49),
            Mat::scalar(2.0),
            Mat::scalar(-0.7),
            1.0,
        )
        .unwrap();
        (plant, meas, func, obs)
    }

    #[test]
    fn zero_error_history_stays_zero() {
        // plant resting at the origin, observer state zero: the error
        // history vanishes identically, so the decoupled error stays zero
        // no matter what the input does afterwards
        let (plant, meas, func, obs) = scalar_design();
        let traj = simulate_coupled(
            &plant,
            &meas,
            &func,
            &obs,
            Signal::Square { amplitude: 1.0, period: 2.0 },
            &History::zeros(2),
            &History::zeros(1),
            5.0,
            1.0 / 128.0,
        )
        .unwrap();
        let peak = traj.max_error_norm();
        assert!(peak <= 1e-9, "error should stay at zero, peaked at {peak}");
    }

    #[test]
    fn mismatched_observer_is_refused() {
        let (plant, _, func, obs) = scalar_design();
        let wide = MeasurementModel::single(Mat::identity(2), 1.0).unwrap();
        let res = simulate_coupled(
            &plant,
            &wide,
            &func,
            &obs,
            Signal::Zero,
            &History::ones(2),
            &History::ones(1),
            2.0,
            0.01,
        );
        assert!(matches!(res, Err(DdeError::Dimension(_))));
    }
}
