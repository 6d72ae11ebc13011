//! Benchmark plants and their noise channels.
//!
//! Four autonomous systems with scalar outputs:
//!
//! * reverse Duffing oscillator — `ẋ1 = x2³, ẋ2 = −x1`, `y = x1`
//! * Van der Pol oscillator — `ẋ1 = x2, ẋ2 = μ(1−x1²)x2 − x1`, `y = x1`
//! * Rössler attractor — `ẋ1 = −x2−x3, ẋ2 = x1+a·x2, ẋ3 = b+x3(x1−c)`, `y = x2`
//! * Lorenz attractor — `ẋ1 = p(x2−x1), ẋ2 = x1(q−x3)−x2, ẋ3 = x1x2−r·x3`, `y = x2`
//!
//! Process noise enters additively on the state derivative, held constant
//! over each sampling interval; measurement noise is added per output sample.
//! Both are drawn once per run from a seeded stream so realizations are
//! reproducible.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math;
use crate::ode::{integrate_steps, Trajectory};
use crate::rng;

/// One of the benchmark plants, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    ReverseDuffing,
    VanDerPol { mu: f64 },
    Rossler { a: f64, b: f64, c: f64 },
    Lorenz { p: f64, q: f64, r: f64 },
}

impl System {
    /// Reverse Duffing oscillator.
    pub fn duffing() -> Self {
        System::ReverseDuffing
    }

    /// Van der Pol oscillator with μ = 3.
    pub fn vanderpol() -> Self {
        System::VanDerPol { mu: 3.0 }
    }

    /// Rössler attractor with a = b = 0.2, c = 5.7.
    pub fn rossler() -> Self {
        System::Rossler { a: 0.2, b: 0.2, c: 5.7 }
    }

    /// Lorenz attractor with p = 28, q = 10, r = 8/3.
    pub fn lorenz() -> Self {
        System::Lorenz { p: 28.0, q: 10.0, r: 8.0 / 3.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            System::ReverseDuffing => "duffing",
            System::VanDerPol { .. } => "vanderpol",
            System::Rossler { .. } => "rossler",
            System::Lorenz { .. } => "lorenz",
        }
    }

    /// State dimension.
    pub fn n_x(&self) -> usize {
        match self {
            System::ReverseDuffing | System::VanDerPol { .. } => 2,
            System::Rossler { .. } | System::Lorenz { .. } => 3,
        }
    }

    /// Output dimension (scalar for all four benchmarks).
    pub fn n_y(&self) -> usize {
        1
    }

    /// Internal integrator substeps per sampling interval that keep RK4
    /// stable at the benchmark rate dt = 0.1. The Lorenz coupling constant
    /// drives `|λ|·dt` past RK4's real-axis stability bound, so its sampling
    /// intervals are subdivided; the sample grid itself is unchanged.
    pub fn default_substeps(&self) -> usize {
        match self {
            System::Lorenz { .. } => 4,
            _ => 1,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_x() {
            return Err(Error::DimensionMismatch(format!(
                "{}: state has dimension {}, expected {}",
                self.name(),
                x.len(),
                self.n_x()
            )));
        }
        Ok(())
    }

    /// Evaluate the drift `f(x)` into `dx` (unchecked dimensions).
    #[inline]
    pub fn dynamics_into(&self, x: &[f64], dx: &mut [f64]) {
        match self {
            System::ReverseDuffing => {
                dx[0] = x[1] * x[1] * x[1];
                dx[1] = -x[0];
            }
            System::VanDerPol { mu } => {
                dx[0] = x[1];
                dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
            }
            System::Rossler { a, b, c } => {
                dx[0] = -x[1] - x[2];
                dx[1] = x[0] + a * x[1];
                dx[2] = b + x[2] * (x[0] - c);
            }
            System::Lorenz { p, q, r } => {
                dx[0] = p * (x[1] - x[0]);
                dx[1] = x[0] * (q - x[2]) - x[1];
                dx[2] = x[0] * x[1] - r * x[2];
            }
        }
    }

    /// `f(x)` with dimension checking.
    pub fn eval_dynamics(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut dx = vec![0.0; self.n_x()];
        self.dynamics_into(x, &mut dx);
        Ok(dx)
    }

    /// Evaluate the output map `h(x)` into `y` (unchecked dimensions).
    #[inline]
    pub fn output_into(&self, x: &[f64], y: &mut [f64]) {
        y[0] = match self {
            System::ReverseDuffing | System::VanDerPol { .. } => x[0],
            System::Rossler { .. } | System::Lorenz { .. } => x[1],
        };
    }

    /// `h(x)` with dimension checking.
    pub fn eval_output(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut y = vec![0.0; self.n_y()];
        self.output_into(x, &mut y);
        Ok(y)
    }

    /// Analytic Jacobian `∂h/∂x` (a constant selector row for all four
    /// benchmarks).
    pub fn eval_output_jacobian(&self, x: &[f64]) -> Result<Mat> {
        self.check_dim(x)?;
        let mut j = Mat::zeros(self.n_y(), self.n_x());
        let col = match self {
            System::ReverseDuffing | System::VanDerPol { .. } => 0,
            System::Rossler { .. } | System::Lorenz { .. } => 1,
        };
        j.set(0, col, 1.0);
        Ok(j)
    }
}

/// Additive noise channels for the robustness experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Process-noise standard deviation per state channel.
    pub w_std: Vec<f64>,
    /// Measurement-noise standard deviation per output channel.
    pub v_std: Vec<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    /// Noise-free specification.
    pub fn none(n_x: usize, n_y: usize) -> Self {
        NoiseSpec { w_std: vec![0.0; n_x], v_std: vec![0.0; n_y], seed: 0 }
    }

    /// Uniform standard deviations across channels.
    pub fn uniform(n_x: usize, n_y: usize, w_std: f64, v_std: f64, seed: u64) -> Self {
        NoiseSpec { w_std: vec![w_std; n_x], v_std: vec![v_std; n_y], seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_std.iter().chain(&self.v_std).any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidArgument(
                "noise standard deviations must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.w_std.iter().chain(&self.v_std).all(|&s| s == 0.0)
    }
}

/// A drawn noise realization: one process-noise row per integration step and
/// one measurement-noise row per sample.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    /// Process noise, `n_steps × n_x`; row `k` is held constant over step `k`.
    pub w: Mat,
    /// Measurement noise, `(n_steps+1) × n_y`; row `k` applies to sample `k`.
    pub v: Mat,
    /// Empirical `‖w‖∞` of this realization.
    pub wbar: f64,
    /// Empirical `‖v‖∞` of this realization.
    pub vbar: f64,
}

impl NoiseRealization {
    /// Draw a realization. The stream order is fixed: all process-noise rows
    /// first, then all measurement-noise rows.
    pub fn draw(spec: &NoiseSpec, n_steps: usize, n_x: usize, n_y: usize) -> Result<Self> {
        spec.validate()?;
        if spec.w_std.len() != n_x || spec.v_std.len() != n_y {
            return Err(Error::DimensionMismatch(format!(
                "noise spec has {}/{} channels, system has {}/{}",
                spec.w_std.len(),
                spec.v_std.len(),
                n_x,
                n_y
            )));
        }
        let mut r = rng::seeded(spec.seed);
        let mut w = Mat::zeros(n_steps, n_x);
        for k in 0..n_steps {
            let row = w.row_mut(k);
            for (c, std) in spec.w_std.iter().enumerate() {
                if *std > 0.0 {
                    row[c] = std * rng::standard_normal(&mut r);
                }
            }
        }
        let mut v = Mat::zeros(n_steps + 1, n_y);
        for k in 0..=n_steps {
            let row = v.row_mut(k);
            for (c, std) in spec.v_std.iter().enumerate() {
                if *std > 0.0 {
                    row[c] = std * rng::standard_normal(&mut r);
                }
            }
        }
        let wbar = math::norm_inf(w.data());
        let vbar = math::norm_inf(v.data());
        Ok(NoiseRealization { w, v, wbar, vbar })
    }
}

/// `f(x) + w_k` with the process-noise row indexed by integration step.
pub struct PerturbedField<'a> {
    pub system: &'a System,
    pub w: &'a Mat,
}

impl<'a> PerturbedField<'a> {
    pub fn eval_into(&self, step: usize, x: &[f64], dx: &mut [f64]) {
        self.system.dynamics_into(x, dx);
        for (d, wi) in dx.iter_mut().zip(self.w.row(step)) {
            *d += wi;
        }
    }
}

/// `h(x) + v_k`, with the measurement-noise row indexed by sample.
pub fn noisy_output(sys: &System, x: &[f64], noise: &NoiseRealization, step: usize) -> Result<Vec<f64>> {
    let mut y = sys.eval_output(x)?;
    for (yi, vi) in y.iter_mut().zip(noise.v.row(step)) {
        *yi += vi;
    }
    Ok(y)
}

/// Simulate the plant over `n_steps` sampling intervals, optionally with a
/// per-step process-noise realization and internal substeps.
pub fn simulate_plant(
    sys: &System,
    x0: &[f64],
    n_steps: usize,
    dt: f64,
    substeps: usize,
    w: Option<&Mat>,
) -> Result<Trajectory> {
    if x0.len() != sys.n_x() {
        return Err(Error::DimensionMismatch(format!(
            "{}: initial state has dimension {}, expected {}",
            sys.name(),
            x0.len(),
            sys.n_x()
        )));
    }
    match w {
        None => integrate_steps(&|x: &[f64], dx: &mut [f64]| sys.dynamics_into(x, dx), x0, n_steps, dt, substeps),
        Some(w) => {
            if w.rows() < n_steps || w.cols() != sys.n_x() {
                return Err(Error::DimensionMismatch(
                    "process-noise realization shorter than the horizon".into(),
                ));
            }
            // Noise is piecewise constant per sampling interval, so the
            // stepwise loop re-enters the integrator once per interval.
            let field = PerturbedField { system: sys, w };
            let mut states = Mat::zeros(n_steps + 1, sys.n_x());
            states.row_mut(0).copy_from_slice(x0);
            let mut cur = x0.to_vec();
            for k in 0..n_steps {
                let step_field = |x: &[f64], dx: &mut [f64]| field.eval_into(k, x, dx);
                let seg = integrate_steps(&step_field, &cur, 1, dt, substeps)
                    .map_err(|_| Error::Divergence { step: k + 1 })?;
                cur.copy_from_slice(seg.last_state());
                states.row_mut(k + 1).copy_from_slice(&cur);
            }
            let times = (0..=n_steps).map(|k| k as f64 * dt).collect();
            Ok(Trajectory::new(times, states))
        }
    }
}

/// Sampled clean output sequence of a state trajectory.
pub fn output_sequence(sys: &System, traj: &Trajectory) -> Mat {
    let mut y = Mat::zeros(traj.len(), sys.n_y());
    for k in 0..traj.len() {
        let (x, row) = (traj.state(k), k);
        let mut out = [0.0];
        sys.output_into(x, &mut out);
        y.row_mut(row).copy_from_slice(&out);
    }
    y
}

/// Parse a benchmark name as used in configuration files.
pub fn system_by_name(name: &str) -> Option<System> {
    match name {
        "duffing" => Some(System::duffing()),
        "vanderpol" => Some(System::vanderpol()),
        "rossler" => Some(System::rossler()),
        "lorenz" => Some(System::lorenz()),
        _ => None,
    }
}
