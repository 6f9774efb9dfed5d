//! Problem and report file schemas.
//!
//! Problems and reports are JSON with matrices as row-major nested arrays;
//! serde_json prints floats in shortest round-trip form, so re-ingesting a
//! report reproduces bit-identical gains. Trajectories are CSV with a
//! header row.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use tdcomp::dde::{RootReport, Signal};
use tdcomp::linalg::Mat;
use tdcomp::model::{Functional, FunctionalObserver, MeasurementModel, Plant};
use tdcomp::pipeline::{Certificate, SynthesisOptions};
use tdcomp::sdp::{DelaySweepResult, SolverConfig};
use tdcomp::synthesis::CaseTag;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub plant: PlantSpec,
    pub measurement: MeasurementSpec,
    pub functional: FunctionalSpec,
    #[serde(default)]
    pub synthesis: SynthesisSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantSpec {
    pub a: Mat,
    pub b: Mat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementSpec {
    Single { c_tau: Mat, tau: f64 },
    TwoDelay { c_tau: Mat, c_h: Mat, tau: f64, h: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub f: Mat,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SynthesisSpec {
    /// Pin the delayed gain instead of searching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tau: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_h: Option<Mat>,
    /// Pin the reduced gain of the rank-deficient branch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_bar: Option<Mat>,
    /// Rows appended to the functional when augmentation is needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment_rows: Option<Mat>,
    /// Override the free-weighting scalar grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub t_end: f64,
    pub step: f64,
    /// Constant plant history (defaults to all ones).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_history: Option<Vec<f64>>,
    /// Constant observer history (defaults to all zeros).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_history: Option<Vec<f64>>,
    #[serde(default = "default_input")]
    pub input: InputSpec,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec { t_end: 20.0, step: 0.01, x_history: None, w_history: None, input: default_input() }
    }
}

fn default_input() -> InputSpec {
    InputSpec::Zero
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    Zero,
    Step { amplitude: f64 },
    Square { amplitude: f64, period: f64 },
}

impl InputSpec {
    pub fn to_signal(self) -> Signal {
        match self {
            InputSpec::Zero => Signal::Zero,
            InputSpec::Step { amplitude } => Signal::Step { amplitude },
            InputSpec::Square { amplitude, period } => Signal::Square { amplitude, period },
        }
    }
}

impl ProblemFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading problem file {}", path.display()))?;
        let parsed: ProblemFile =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(parsed)
    }

    /// Validate against the model invariants and build the domain objects.
    pub fn build(&self) -> Result<(Plant, MeasurementModel, Functional)> {
        if let InputSpec::Square { period, .. } = self.simulation.input {
            if !(period > 0.0) {
                bail!("square-wave input needs a positive period");
            }
        }
        if !(self.simulation.step > 0.0) || !(self.simulation.t_end > 0.0) {
            bail!("simulation step and horizon must be positive");
        }
        let plant = Plant::new(self.plant.a.clone(), self.plant.b.clone())?;
        let meas = match &self.measurement {
            MeasurementSpec::Single { c_tau, tau } => {
                MeasurementModel::single(c_tau.clone(), *tau)?
            }
            MeasurementSpec::TwoDelay { c_tau, c_h, tau, h } => {
                MeasurementModel::two_delay(c_tau.clone(), c_h.clone(), *tau, *h)?
            }
        };
        let func = Functional::new(self.functional.f.clone())?;
        if func.f.cols() != plant.state_dim() {
            bail!("functional width {} does not match plant order {}", func.f.cols(), plant.state_dim());
        }
        if meas.state_dim() != plant.state_dim() {
            bail!("measurement width {} does not match plant order {}", meas.state_dim(), plant.state_dim());
        }
        if func.dim() > plant.state_dim() {
            bail!("functional has more rows than the plant has states");
        }
        Ok((plant, meas, func))
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            pinned_n_tau: self.synthesis.n_tau.clone(),
            pinned_n_h: self.synthesis.n_h.clone(),
            pinned_z_bar: self.synthesis.z_bar.clone(),
            augment_rows: self.synthesis.augment_rows.clone(),
        }
    }

    pub fn solver_config(&self, lambda_override: Option<Vec<f64>>, max_iterations: Option<usize>) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(grid) = lambda_override.or_else(|| self.synthesis.lambda_grid.clone()) {
            cfg.lambda_grid = grid;
        }
        if let Some(iters) = max_iterations {
            cfg.max_iterations = iters;
        }
        cfg
    }
}

/// Everything a command run reports. Every stability claim carries its
/// certificate (an LMI margin or a root abscissa).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportFile {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<FunctionalObserver>,
    /// Functional the observer estimates (augmented when case 3 was taken).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roots: Option<RootReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<DelaySweepResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_norm: Option<f64>,
    /// Euclidean error norms at the simulation tail, when a simulation ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_error_norm: Option<f64>,
}

impl ReportFile {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).context("serializing report")?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading report file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Write a trajectory as CSV (`t, x_i, zhat_j, y_k, e_j`) and optionally a
/// whitespace-separated `.dat` mirror for gnuplot.
pub fn write_trajectory_csv(
    path: &std::path::Path,
    traj: &tdcomp::dde::CoupledTrajectory,
    dat_mirror: bool,
) -> Result<()> {
    let mut out = String::new();
    let (nx, nz, ny, ne) = (
        traj.x.first().map_or(0, Vec::len),
        traj.zhat.first().map_or(0, Vec::len),
        traj.y.first().map_or(0, Vec::len),
        traj.e.first().map_or(0, Vec::len),
    );
    let mut header = vec!["t".to_string()];
    header.extend((1..=nx).map(|i| format!("x{i}")));
    header.extend((1..=nz).map(|i| format!("zhat{i}")));
    header.extend((1..=ny).map(|i| format!("y{i}")));
    header.extend((1..=ne).map(|i| format!("e{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for idx in 0..traj.times.len() {
        let mut row = vec![format!("{}", traj.times[idx])];
        row.extend(traj.x[idx].iter().map(|v| format!("{v}")));
        row.extend(traj.zhat[idx].iter().map(|v| format!("{v}")));
        row.extend(traj.y[idx].iter().map(|v| format!("{v}")));
        row.extend(traj.e[idx].iter().map(|v| format!("{v}")));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, &out).with_context(|| format!("writing {}", path.display()))?;
    if dat_mirror {
        let dat = out.replace(',', " ");
        let mut dat_path = path.to_path_buf();
        dat_path.set_extension("dat");
        std::fs::write(&dat_path, dat.replacen(&header.join(" "), &format!("# {}", header.join(" ")), 1))
            .with_context(|| format!("writing {}", dat_path.display()))?;
    }
    Ok(())
}
