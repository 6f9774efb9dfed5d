//! Delay-differential validation: method-of-steps simulation, rightmost
//! characteristic roots, and the exact scalar stability test.
//!
//! The carrier type is the linear DDE
//! `ẋ(t) = A₀x(t) + Σᵢ Aᵢ x(t−τᵢ) [+ forcing]`, which hosts estimation-error
//! systems, closed-loop realizations, and coupled plant–observer stacks.

mod roots;
mod simulate;

pub use roots::{characteristic_residual, rightmost_roots, RootReport};
pub use simulate::{
    simulate, simulate_closed_loop, simulate_coupled, CoupledTrajectory, History, Trajectory,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Mat};

#[derive(Debug, Error)]
pub enum DdeError {
    #[error("delays must be strictly positive and strictly increasing")]
    DelayOrder,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("step {step} too large: must be at most min delay / 4 = {limit}")]
    StepTooLarge { step: f64, limit: f64 },
    #[error("step and horizon must be positive and finite")]
    BadGrid,
    #[error("history produced a non-finite or wrongly sized value")]
    BadHistory,
    #[error("simulation produced non-finite values at t = {t}")]
    Diverged { t: f64 },
    #[error(transparent)]
    LinAlg(#[from] linalg::LinAlgError),
}

/// Linear constant-coefficient DDE with optional affine forcing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdeSystem {
    a0: Mat,
    delayed: Vec<(Mat, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    forcing: Option<Forcing>,
}

/// Input channel `B₀u(t) + Σᵢ Bᵢ u(t−dᵢ)` driven by a built-in signal.
/// The signal is zero for `t < 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forcing {
    pub b0: Mat,
    pub delayed: Vec<(Mat, f64)>,
    pub signal: Signal,
}

/// The built-in input signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Zero,
    /// `amplitude` for `t ≥ 0`.
    Step { amplitude: f64 },
    /// `+amplitude` on the first half of each period, `−amplitude` on the
    /// second half.
    Square { amplitude: f64, period: f64 },
}

impl Signal {
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Signal::Zero => 0.0,
            Signal::Step { amplitude } => amplitude,
            Signal::Square { amplitude, period } => {
                let phase = (t / period).rem_euclid(1.0);
                if phase < 0.5 {
                    amplitude
                } else {
                    -amplitude
                }
            }
        }
    }
}

impl DdeSystem {
    /// Build a system; delay terms are sorted and merged, zero-delay terms
    /// are rejected, and all matrices must be square of the same size.
    pub fn new(a0: Mat, delayed: Vec<(Mat, f64)>) -> Result<Self, DdeError> {
        if !a0.is_square() {
            return Err(DdeError::Dimension(format!(
                "state matrix must be square, got {}x{}",
                a0.rows(),
                a0.cols()
            )));
        }
        let n = a0.rows();
        let mut terms = delayed;
        for (m, d) in &terms {
            if !(*d > 0.0) || !d.is_finite() {
                return Err(DdeError::DelayOrder);
            }
            if m.rows() != n || m.cols() != n {
                return Err(DdeError::Dimension("delayed matrix size".into()));
            }
        }
        terms.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        // merge duplicate delays
        let mut merged: Vec<(Mat, f64)> = Vec::new();
        for (m, d) in terms {
            match merged.last_mut() {
                Some((prev, pd)) if (d - *pd).abs() <= 1e-12 * d.max(1.0) => {
                    *prev = prev.add_ref(&m);
                }
                _ => merged.push((m, d)),
            }
        }
        Ok(DdeSystem { a0, delayed: merged, forcing: None })
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Result<Self, DdeError> {
        if forcing.b0.rows() != self.dim() {
            return Err(DdeError::Dimension("forcing row count".into()));
        }
        let cols = forcing.b0.cols();
        for (m, d) in &forcing.delayed {
            if m.rows() != self.dim() || m.cols() != cols {
                return Err(DdeError::Dimension("delayed forcing size".into()));
            }
            if !(*d > 0.0) {
                return Err(DdeError::DelayOrder);
            }
        }
        self.forcing = Some(forcing);
        Ok(self)
    }

    pub fn a0(&self) -> &Mat {
        &self.a0
    }

    pub fn delayed(&self) -> &[(Mat, f64)] {
        &self.delayed
    }

    pub fn forcing(&self) -> Option<&Forcing> {
        self.forcing.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.a0.rows()
    }

    /// Largest delay appearing in the state or forcing terms; 0 when
    /// delay-free.
    pub fn max_delay(&self) -> f64 {
        let state = self.delayed.last().map_or(0.0, |(_, d)| *d);
        let forced = self
            .forcing
            .as_ref()
            .and_then(|f| f.delayed.iter().map(|(_, d)| *d).fold(None, |m: Option<f64>, d| {
                Some(m.map_or(d, |x| x.max(d)))
            }))
            .unwrap_or(0.0);
        state.max(forced)
    }

    /// Smallest state delay, if any.
    pub fn min_delay(&self) -> Option<f64> {
        self.delayed.first().map(|(_, d)| *d)
    }
}

/// Exact stability test for the scalar equation `ė = a·e + b·e(t−τ)`:
/// holds iff `a + b < 0` and `b ≥ −1/τ`.
pub fn scalar_mori_test(a: f64, b: f64, tau: f64) -> bool {
    a + b < 0.0 && b >= -1.0 / tau
}

/// Largest delay for which some `b` passes [`scalar_mori_test`]: the two
/// conditions admit a `b` iff `a < 1/τ`, so the limit is `1/a` for unstable
/// `a > 0` and unbounded otherwise.
pub fn scalar_mori_delay_limit(a: f64) -> f64 {
    if a > 0.0 {
        1.0 / a
    } else {
        f64::INFINITY
    }
}
